// SPDX-License-Identifier: Apache-2.0
/**
 * @file   evaluation.hpp
 * @brief  Held-out RMSE, Mean/Prev/KNN baselines, the downstream regression
 *         protocol, the ablation runner and table formatting.
 *
 * Everything here works in normalized space.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sting/config.hpp"
#include "sting/inference.hpp"
#include "sting/training.hpp"

namespace sting {

/// sqrt(mean over target cells of (imputed − truth)²). Throws if empty.
double rmse_heldout(const Matrix &imputed, const EvalTargets &targets);

/// Pools every window's ground_truth cells.
double rmse_heldout(std::span<const Matrix> imputed,
                    std::span<const TimeSeriesWindow> windows);

/// Mean of observed values per feature; 0 for a feature never observed.
Vector feature_means(std::span<const TimeSeriesWindow> windows);

Matrix baseline_mean(const TimeSeriesWindow &window, const Vector &means);

/// Carries the last observation forward; a leading gap takes the mean.
Matrix baseline_prev(const TimeSeriesWindow &window, const Vector &means);

/// Each window is filled from its k nearest other windows in the set,
/// ranked by squared distance over co-observed cells divided by their
/// count. Cells no neighbour observed take the mean.
std::vector<Matrix> baseline_knn(std::span<const TimeSeriesWindow> windows,
                                 Eigen::Index k, const Vector &means);

/// Fills the missing cells of windows (observed cells pass through).
using WindowImputer =
    std::function<std::vector<Matrix>(std::span<const TimeSeriesWindow>)>;

struct NamedImputer {
  std::string name;
  WindowImputer impute;
};

/// Mean, Prev and KNN imputers.
std::vector<NamedImputer> baseline_imputers(const Vector &means,
                                            Eigen::Index knn_k);

/// Wraps a trained model. The noise generator is seeded per call.
NamedImputer sting_imputer(const StingModel &model,
                           const InferenceOptions &options, std::uint64_t seed,
                           const std::string &name = "STING");

InferenceOptions inference_options_from(const ExperimentConfig &config);

struct ScoreRow {
  std::string name;
  double rmse = 0.0;
};

/// Runs every imputer on windows carrying ground_truth and scores each.
std::vector<ScoreRow> score_imputers(std::span<const TimeSeriesWindow> windows,
                                     const std::vector<NamedImputer> &imputers);

/// Windows with an independent MCAR removal of observed cells (Δ rebuilt).
std::vector<TimeSeriesWindow>
corrupt_windows(std::span<const TimeSeriesWindow> windows, double ratio,
                std::uint64_t seed);

/// Drops one feature column from every window.
std::vector<TimeSeriesWindow>
drop_feature(std::span<const TimeSeriesWindow> windows, Eigen::Index feature);

// Downstream regression protocol.

struct RegressorOptions {
  Eigen::Index hidden = 64;
  double dropout = 0.3;
  long epochs = 20;
  double lr = 1e-3;
  Eigen::Index batch_size = 64;
};

/// Two stacked GRU layers, dropout between them, affine head; predicts the
/// target feature at every step from the other features.
struct GruRegressor {
  GruCellParams layer1;
  GruCellParams layer2;
  Parameter head_w; // 1 x hidden
  Parameter head_b; // 1 x 1
  double dropout = 0.3;

  static GruRegressor init(Eigen::Index inputs, const RegressorOptions &options,
                           Rng &rng);
  ParameterList parameters();

  /// Trains on complete windows' inputs/targets (T x D' and T x 1 each).
  void fit(std::span<const Matrix> inputs, std::span<const Matrix> targets,
           const RegressorOptions &options, Rng &rng);
  /// Dropout disabled.
  std::vector<Matrix> predict(std::span<const Matrix> inputs) const;
};

struct DownstreamSplit {
  std::vector<TimeSeriesWindow> train;
  std::vector<TimeSeriesWindow> test;
};

/// Seeded shuffle, then the first `train_fraction` windows train.
DownstreamSplit split_dataset(std::span<const TimeSeriesWindow> windows,
                              double train_fraction, std::uint64_t seed);

struct DownstreamOptions {
  Eigen::Index target = -1; // -1 = last feature
  /// Features to corrupt, as indices into the full window; empty = every
  /// feature except the target. Listing the target is an error.
  std::vector<Eigen::Index> corrupted;
  std::vector<double> ratios = {0.0, 0.5};
  RegressorOptions regressor;
  std::uint64_t seed = 0;
};

struct DownstreamTable {
  std::vector<std::string> rows; // imputers, then "Ideal"
  std::vector<double> ratios;
  Matrix rmse; // rows x ratios
};

/// `imputers` see only the non-target features.
DownstreamTable downstream_eval(const DownstreamSplit &split,
                                const std::vector<NamedImputer> &imputers,
                                const DownstreamOptions &options);

// Ablation.

struct AblationRow {
  std::string variant;
  double rmse = 0.0;
  double increase_pct = 0.0;
  std::uint64_t checkpoint_hash = 0;
};

/// Trains each configured variant from scratch on windows carrying
/// ground_truth (no_search reuses the full model) and scores it.
std::vector<AblationRow> run_ablation(const ExperimentConfig &config,
                                      std::span<const TimeSeriesWindow> windows,
                                      const EpochCallback &on_epoch = {});

// Tables.

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  /// Columns padded to a common width.
  std::string to_text() const;
};

std::string format_number(double v, int precision = 4);

Table score_table(const std::vector<ScoreRow> &rows);
Table ablation_table(const std::vector<AblationRow> &rows);
Table downstream_table(const DownstreamTable &t);

} // namespace sting
