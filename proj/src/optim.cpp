// SPDX-License-Identifier: Apache-2.0
#include "sting/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sting {

void Adam::prepare(const ParameterList &params) {
  if (m_.empty()) {
    for (const Parameter *p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Adam: parameter list changed size");
}

void Adam::step(const ParameterList &params) {
  prepare(params);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter &p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.zero_grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(const ParameterList &params, double max_norm) {
  double sq = 0.0;
  for (const Parameter *p : params)
    sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter *p : params)
      p->grad *= s;
  }
  return norm;
}

void zero_grads(const ParameterList &params) {
  for (Parameter *p : params)
    p->zero_grad();
}

} // namespace sting
