// SPDX-License-Identifier: Apache-2.0
/**
 * @file   layers.hpp
 * @brief  Parameter initialisation, GRU cell and temporal decay layer.
 */
#pragma once

#include <string>

#include "sting/autograd.hpp"
#include "sting/core_data.hpp"

namespace sting {

/// Uniform in ±1/√fan_in.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                    Rng &rng);

/// Weights and biases of one GRU cell. The update gate is named `u`.
struct GruCellParams {
  Parameter wr, ur, br;
  Parameter wu, uu, bu;
  Parameter wn, un, bn;

  static GruCellParams init(const std::string &prefix, Eigen::Index input,
                            Eigen::Index hidden, Rng &rng);
  static GruCellParams zeros(const std::string &prefix, Eigen::Index input,
                             Eigen::Index hidden);

  Eigen::Index input_size() const { return wr.value.cols(); }
  Eigen::Index hidden_size() const { return ur.value.rows(); }
  ParameterList parameters();
};

/// γ = exp(−max(0, W δ + b)).
struct DecayParams {
  Parameter w; // hidden x D
  Parameter b; // hidden x 1

  /// W drawn as |uniform| so every rate starts non-increasing in δ.
  static DecayParams init(const std::string &prefix, Eigen::Index features,
                          Eigen::Index hidden, Rng &rng);
  ParameterList parameters();
};

Vector decay_rates(const Vector &delta_row, const DecayParams &params);
Vector apply_decay(const Vector &h_prev, const Vector &gamma);
Vector gru_step(const Vector &x, const Vector &h_prev,
                const GruCellParams &params);

namespace ad {

GruVars bind(Tape &t, const GruCellParams &p, bool track);
/// Decay rates for a block of δ columns (D x B) -> hidden x B.
Var decay(Tape &t, Var w, Var b, Var delta);

} // namespace ad
} // namespace sting
