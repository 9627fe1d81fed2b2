// SPDX-License-Identifier: Apache-2.0
/**
 * @file   inference.hpp
 * @brief  Per-window noise search with frozen weights and the final
 *         bidirectional imputation.
 */
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sting/model.hpp"

namespace sting {

/// Per-block losses for z (column c belongs to block c % batch); writes
/// dL/dz into `grad` when it is non-null.
using BatchObjective =
    std::function<RowVector(const Matrix &z, Matrix *grad)>;

struct SearchResult {
  Matrix z;               // best iterate per block
  RowVector initial_loss; // loss at z_init
  RowVector best_loss;    // loss at the returned z
  long iterations = 0;    // gradient steps actually taken
  bool non_finite = false;
};

/// Plain gradient descent; each block keeps its lowest-loss iterate.
/// Stops early on a non-finite loss or gradient and sets non_finite.
SearchResult gradient_descent_search(const Matrix &z_init, Eigen::Index batch,
                                     const BatchObjective &objective,
                                     long iterations, double step_size);

/// The search objective: per-window L_G with generator and discriminator
/// parameters frozen. The discriminator sees an all-0.5 hint.
BatchObjective noise_objective(const StingModel &model, const BatchPair &pair,
                               const LossWeights &weights);

/// Searches one z' per window of `batch` (z is D x T*B).
SearchResult search_noise(const StingModel &model,
                          std::span<const TimeSeriesWindow> batch,
                          const Matrix &z_init, long iterations,
                          double step_size, const LossWeights &weights);

struct ImputationResult {
  Matrix values;       // T x D, observed cells equal x̄ exactly
  Matrix provenance;   // T x D: 0 = observed, 1 = generated
  Matrix out_of_range; // T x D: 1 where a value leaves [0, 1]
  Matrix forward;      // refined forward output
  Matrix backward;     // refined backward output (copy of forward if absent)
  bool search_warning = false;
};

/// Elementwise mean of the two refined outputs, re-refined against x̄.
Matrix average_directions(const Matrix &fwd_refined, const Matrix &bwd_refined,
                          const Matrix &x_bar, const MaskMatrix &mask);

/// Runs both generators on one window with noise z (T x D).
/// `params_bwd` may be null for a forward-only model.
ImputationResult impute(const TimeSeriesWindow &window,
                        const GeneratorParams &params_fwd,
                        const GeneratorParams *params_bwd, const Matrix &z);

/// Batched imputation of windows sharing T, noise packed D x T*B.
std::vector<ImputationResult> impute_batch(const StingModel &model,
                                           std::span<const TimeSeriesWindow> batch,
                                           const Matrix &z);

struct InferenceOptions {
  bool search = true;
  long iterations = 100;
  double step_size = 0.01;
  double noise_sd = 0.01;
  Eigen::Index batch_size = 128;
  LossWeights weights;
};

struct InferenceReport {
  std::vector<ImputationResult> results;
  /// Per-window L_G before and after the search; NaN when disabled.
  std::vector<double> loss_initial;
  std::vector<double> loss_final;
};

/// Samples z_init from `rng`, optionally searches, and imputes every window.
InferenceReport impute_windows(const StingModel &model,
                               std::span<const TimeSeriesWindow> windows,
                               const InferenceOptions &options, Rng &rng);

/// Imputes a whole series in original units. Observed cells are copied
/// from `raw` unchanged; the provenance matrix marks generated cells.
struct SeriesImputation {
  RawSeries imputed;
  Matrix provenance;
  Matrix out_of_range;
};
SeriesImputation impute_series(const StingModel &model,
                               const NormalizationStats &norm,
                               const RawSeries &raw, Eigen::Index window_length,
                               const InferenceOptions &options, Rng &rng);

} // namespace sting
