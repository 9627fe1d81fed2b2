// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sting/autograd.hpp"

namespace sting {

/// Adam with bias correction. Moments are aligned with the ParameterList
/// passed to step(), which must keep the same order across calls.
class Adam {
public:
  Adam() = default;
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParameterList &params);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }

  std::vector<Matrix> &first_moments() { return m_; }
  std::vector<Matrix> &second_moments() { return v_; }
  const std::vector<Matrix> &first_moments() const { return m_; }
  const std::vector<Matrix> &second_moments() const { return v_; }

  /// Allocates zero moments for `params` if not yet present.
  void prepare(const ParameterList &params);

private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParameterList &params, double max_norm);

void zero_grads(const ParameterList &params);

} // namespace sting
