// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  The full imputer (forward/backward generators + discriminator)
 *         and the objectives shared by training and noise search.
 */
#pragma once

#include "sting/discriminator.hpp"
#include "sting/generator.hpp"

namespace sting {

struct ModelConfig {
  Eigen::Index features = 0;
  Eigen::Index hidden = 64;
  Eigen::Index disc_hidden = 64;
  Eigen::Index heads = 4;
  bool attention = true;
  bool backward = true;
};

struct LossWeights {
  double recon = 10.0;
  double consistency = 1.0;
};

struct StingModel {
  ModelConfig config;
  GeneratorParams forward;
  GeneratorParams backward; // empty when config.backward is false
  DiscriminatorParams discriminator;

  static StingModel init(const ModelConfig &config, Rng &rng);

  ParameterList generator_parameters();
  ParameterList discriminator_parameters();
  ParameterList all_parameters();
};

/// FNV-1a over parameter names, shapes and raw values.
std::uint64_t parameter_hash(StingModel &model);

namespace ad {

/// Per-window (1 x B) loss rows. Absent terms are invalid Vars.
struct GeneratorObjective {
  GeneratorTrace forward;
  GeneratorTrace backward;
  Var recon_fwd, recon_bwd;
  Var consistency;
  Var adv_fwd, adv_bwd;
  Var total;
};

/// λ_r ΣL_R + λ_c L_C over the enabled directions.
GeneratorObjective generator_terms(Tape &t, const StingModel &model,
                                   bool track_generators, const BatchPair &pair,
                                   Var noise, const LossWeights &weights);

/// Scores the refined outputs with the (untracked) discriminator and adds
/// ΣL_W to o.total.
void add_adversarial(Tape &t, const StingModel &model, const BatchPair &pair,
                     const Matrix &hint, GeneratorObjective &o);

/// generator_terms plus add_adversarial; the adversarial terms are omitted
/// when `hint` is null.
GeneratorObjective generator_objective(Tape &t, const StingModel &model,
                                       bool track_generators,
                                       const BatchPair &pair, Var noise,
                                       const Matrix *hint,
                                       const LossWeights &weights);

/// Mean of the per-direction discriminator losses (1 x B) for fixed
/// generator outputs.
Var discriminator_objective(Tape &t, const StingModel &model, bool track,
                            const BatchPair &pair, const Matrix &x_fwd,
                            const Matrix *x_bwd, const Matrix &hint);

} // namespace ad
} // namespace sting
