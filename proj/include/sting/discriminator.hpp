// SPDX-License-Identifier: Apache-2.0
/**
 * @file   discriminator.hpp
 * @brief  Hint sampling, per-element GRU discriminator and its loss.
 */
#pragma once

#include <cstdint>
#include <string>

#include "sting/autograd.hpp"
#include "sting/core_data.hpp"
#include "sting/layers.hpp"

namespace sting {

/// Entries in {0, 0.5, 1}: 0.5 = unrevealed, otherwise the mask value.
using HintMatrix = Matrix;
/// Per-element probability that a cell is observed.
using ProbabilityMatrix = Matrix;

struct DiscriminatorParams {
  GruCellParams cell;
  Parameter out_w; // D x hidden
  Parameter out_b; // D x 1

  static DiscriminatorParams init(const std::string &prefix,
                                  Eigen::Index features, Eigen::Index hidden,
                                  Rng &rng);
  static DiscriminatorParams zeros(const std::string &prefix,
                                   Eigen::Index features, Eigen::Index hidden);

  Eigen::Index features() const { return out_w.value.rows(); }
  Eigen::Index hidden_size() const { return out_w.value.cols(); }
  ParameterList parameters();
};

/// Each cell independently revealed (h = m) with probability `ratio`.
HintMatrix sample_hint(const MaskMatrix &m, double ratio, Rng &rng);
HintMatrix sample_hint(const MaskMatrix &m, double ratio, std::uint64_t seed);

ProbabilityMatrix discriminate(const Matrix &x_hat_refined,
                               const HintMatrix &hint,
                               const DiscriminatorParams &params);

/// mean(m̂ | m = 0) − mean(m̂ | m = 1); empty groups contribute 0.
double loss_discriminator(const ProbabilityMatrix &m_hat, const MaskMatrix &m);

namespace ad {

/// x_hat and hint are D x T*B; returns probabilities D x T*B.
Var run_discriminator(Tape &t, const DiscriminatorParams &params, bool track,
                      Var x_hat, const Matrix &hint, Eigen::Index steps,
                      Eigen::Index batch);

/// Per-window discriminator loss (1 x B).
Var discriminator_loss(Tape &t, Var m_hat, const Matrix &mask,
                       Eigen::Index batch);

} // namespace ad
} // namespace sting
