// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_support.hpp
 * @brief  Finite-difference checks, random instance generators and
 *         brute-force oracles shared by the test binaries.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sting/autograd.hpp"
#include "sting/core_data.hpp"

namespace sting::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = u(rng);
  return m;
}

inline Matrix random_mask(Eigen::Index rows, Eigen::Index cols, double p_obs,
                          Rng &rng) {
  std::bernoulli_distribution b(p_obs);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = b(rng) ? 1.0 : 0.0;
  return m;
}

/// Strictly increasing timestamps with gaps in [0.25, 3].
inline std::vector<double> random_timestamps(Eigen::Index n, Rng &rng) {
  std::uniform_real_distribution<double> gap(0.25, 3.0);
  std::vector<double> s(static_cast<std::size_t>(n));
  double t = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
  for (auto &v : s) {
    v = t;
    t += gap(rng);
  }
  return s;
}

/// Window with values in [0, 1], random mask and timestamps.
inline TimeSeriesWindow random_window(Eigen::Index T, Eigen::Index D,
                                      double p_obs, Rng &rng) {
  Matrix values = random_matrix(T, D, rng, 0.0, 1.0);
  const Matrix m = random_mask(T, D, p_obs, rng);
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (m.data()[i] == 0.0)
      values.data()[i] = std::nan("");
  const std::vector<double> ts = random_timestamps(T, rng);
  return make_window(values, ts);
}

/// δ by scanning back to the last observed step before t (or the first
/// step when there is none) and summing the gaps from there to t.
inline Matrix delta_oracle(const std::vector<double> &s, const Matrix &mask) {
  Matrix d = Matrix::Zero(mask.rows(), mask.cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c)
    for (Eigen::Index t = 1; t < mask.rows(); ++t) {
      Eigen::Index j = t - 1;
      while (j > 0 && mask(j, c) == 0.0)
        --j;
      double sum = 0.0;
      for (Eigen::Index k = j + 1; k <= t; ++k)
        sum = (s[static_cast<std::size_t>(k)] - s[static_cast<std::size_t>(k - 1)]) + sum;
      d(t, c) = sum;
    }
  return d;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

/// Builds a scalar (or row, summed) loss from leaf variables.
using LossBuilder =
    std::function<ad::Var(ad::Tape &, const std::vector<ad::Var> &)>;

inline double evaluate_loss(const std::vector<Matrix> &inputs,
                            const LossBuilder &f) {
  ad::Tape t;
  std::vector<ad::Var> vars;
  for (const Matrix &m : inputs)
    vars.push_back(t.constant(m));
  ad::Var out = f(t, vars);
  return t.value(out).sum();
}

/// Largest relative error between tape gradients and central differences
/// over every entry of every input.
inline double gradient_check(const std::vector<Matrix> &inputs,
                             const LossBuilder &f, double h = 1e-6) {
  ad::Tape t;
  std::vector<ad::Var> vars;
  for (const Matrix &m : inputs)
    vars.push_back(t.variable(m));
  ad::Var out = f(t, vars);
  if (t.value(out).size() != 1)
    out = ad::sum(t, out);
  t.backward(out);

  double worst = 0.0;
  std::vector<Matrix> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = t.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = probe[k].data()[i];
      probe[k].data()[i] = x0 + h;
      const double up = evaluate_loss(probe, f);
      probe[k].data()[i] = x0 - h;
      const double down = evaluate_loss(probe, f);
      probe[k].data()[i] = x0;
      worst = std::max(worst, relative_error(g.data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

/// Same check for parameters bound inside `f` with tracking enabled.
inline double
parameter_gradient_check(const ParameterList &params,
                         const std::function<ad::Var(ad::Tape &)> &f,
                         double h = 1e-6) {
  for (Parameter *p : params)
    p->zero_grad();
  {
    ad::Tape t;
    ad::Var out = f(t);
    if (t.value(out).size() != 1)
      out = ad::sum(t, out);
    t.backward(out);
  }
  auto eval = [&] {
    ad::Tape t;
    return t.value(f(t)).sum();
  };
  double worst = 0.0;
  for (Parameter *p : params) {
    const Matrix g = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double x0 = p->value.data()[i];
      p->value.data()[i] = x0 + h;
      const double up = eval();
      p->value.data()[i] = x0 - h;
      const double down = eval();
      p->value.data()[i] = x0;
      worst = std::max(worst, relative_error(g.data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

inline Matrix softmax_rows(const Matrix &a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      s += out(i, j) = std::exp(a(i, j) - mx);
    out.row(i) /= s;
  }
  return out;
}

/// Scaled dot-product attention on row-per-item matrices, written out loop
/// by loop.
inline Matrix attention_oracle(const Matrix &q, const Matrix &k,
                               const Matrix &v) {
  Matrix scores(q.rows(), k.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c)
        s += q(i, c) * k(j, c);
      scores(i, j) = s / std::sqrt(static_cast<double>(q.cols()));
    }
  return softmax_rows(scores) * v;
}

} // namespace sting::testing
