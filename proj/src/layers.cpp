// SPDX-License-Identifier: Apache-2.0
#include "sting/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace sting {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                    Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = dist(rng);
  return m;
}

GruCellParams GruCellParams::init(const std::string &prefix, Eigen::Index input,
                                  Eigen::Index hidden, Rng &rng) {
  GruCellParams p;
  const Eigen::Index fan = input + hidden;
  auto w = [&](const char *n) {
    return Parameter(prefix + "/" + n, uniform_init(hidden, input, fan, rng));
  };
  auto u = [&](const char *n) {
    return Parameter(prefix + "/" + n, uniform_init(hidden, hidden, fan, rng));
  };
  auto b = [&](const char *n) {
    return Parameter(prefix + "/" + n, Matrix::Zero(hidden, 1));
  };
  p.wr = w("w_r");
  p.ur = u("u_r");
  p.br = b("b_r");
  p.wu = w("w_u");
  p.uu = u("u_u");
  p.bu = b("b_u");
  p.wn = w("w_n");
  p.un = u("u_n");
  p.bn = b("b_n");
  return p;
}

GruCellParams GruCellParams::zeros(const std::string &prefix,
                                   Eigen::Index input, Eigen::Index hidden) {
  GruCellParams p;
  auto m = [&](const char *n, Eigen::Index r, Eigen::Index c) {
    return Parameter(prefix + "/" + n, Matrix::Zero(r, c));
  };
  p.wr = m("w_r", hidden, input);
  p.ur = m("u_r", hidden, hidden);
  p.br = m("b_r", hidden, 1);
  p.wu = m("w_u", hidden, input);
  p.uu = m("u_u", hidden, hidden);
  p.bu = m("b_u", hidden, 1);
  p.wn = m("w_n", hidden, input);
  p.un = m("u_n", hidden, hidden);
  p.bn = m("b_n", hidden, 1);
  return p;
}

ParameterList GruCellParams::parameters() {
  return {&wr, &ur, &br, &wu, &uu, &bu, &wn, &un, &bn};
}

DecayParams DecayParams::init(const std::string &prefix, Eigen::Index features,
                              Eigen::Index hidden, Rng &rng) {
  DecayParams p;
  p.w = Parameter(prefix + "/w_gamma",
                  uniform_init(hidden, features, features, rng).cwiseAbs());
  p.b = Parameter(prefix + "/b_gamma", Matrix::Zero(hidden, 1));
  return p;
}

ParameterList DecayParams::parameters() { return {&w, &b}; }

Vector decay_rates(const Vector &delta_row, const DecayParams &params) {
  if (params.w.value.cols() != delta_row.size())
    throw std::invalid_argument("decay_rates: δ has " +
                                std::to_string(delta_row.size()) +
                                " entries, W_γ expects " +
                                std::to_string(params.w.value.cols()));
  const Vector pre = params.w.value * delta_row + params.b.value.col(0);
  return (-pre.cwiseMax(0.0)).array().exp().matrix();
}

Vector apply_decay(const Vector &h_prev, const Vector &gamma) {
  if (h_prev.size() != gamma.size())
    throw std::invalid_argument("apply_decay: length mismatch");
  return gamma.cwiseProduct(h_prev);
}

Vector gru_step(const Vector &x, const Vector &h_prev,
                const GruCellParams &params) {
  if (x.size() != params.input_size() || h_prev.size() != params.hidden_size())
    throw std::invalid_argument("gru_step: expected input " +
                                std::to_string(params.input_size()) +
                                " and hidden " +
                                std::to_string(params.hidden_size()));
  ad::Tape t;
  const ad::Var xv = t.constant(x);
  const ad::Var hv = t.constant(h_prev);
  return t.value(ad::gru_cell(t, xv, hv, ad::bind(t, params, false))).col(0);
}

namespace ad {

GruVars bind(Tape &t, const GruCellParams &p, bool track) {
  return {t.parameter(p.wr, track), t.parameter(p.ur, track),
          t.parameter(p.br, track), t.parameter(p.wu, track),
          t.parameter(p.uu, track), t.parameter(p.bu, track),
          t.parameter(p.wn, track), t.parameter(p.un, track),
          t.parameter(p.bn, track)};
}

Var decay(Tape &t, Var w, Var b, Var delta) {
  Var pre = affine(t, w, delta, b);
  return exp(t, scale(t, relu(t, pre), -1.0));
}

} // namespace ad
} // namespace sting
