// SPDX-License-Identifier: Apache-2.0
/**
 * @file   core_data.hpp
 * @brief  Series ingestion, mask/time-lag construction, normalization,
 *         windowing and holdout masking.
 *
 * Matrices here are T x D: one row per time step, one column per feature.
 * Absent values in a RawSeries are quiet NaNs.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sting/autograd.hpp"

namespace sting {

using Rng = std::mt19937_64;

/// Entry is 1 where the cell was observed, else 0.
using MaskMatrix = Matrix;
/// Elapsed time since each feature was last observed.
using DeltaMatrix = Matrix;

struct RawSeries {
  std::vector<double> timestamps;
  Matrix values; // T x D, NaN = absent
  std::vector<std::string> feature_names;

  Eigen::Index steps() const { return values.rows(); }
  Eigen::Index features() const { return values.cols(); }
};

struct HeldOutCell {
  Eigen::Index step = 0;
  Eigen::Index feature = 0;
  double value = 0.0;
};

/// Observed cells removed from a window to serve as imputation ground truth.
struct EvalTargets {
  std::vector<HeldOutCell> cells;
  bool empty() const { return cells.empty(); }
};

struct TimeSeriesWindow {
  Matrix x_bar;      // T x D, 0 at missing cells
  MaskMatrix mask;   // T x D
  DeltaMatrix delta; // T x D
  std::vector<double> timestamps;
  /// Rows after this index are padding appended to a short remainder.
  Eigen::Index valid_steps = 0;
  bool padded = false;
  /// Row offset of the window inside its source series.
  Eigen::Index origin = 0;
  std::optional<EvalTargets> ground_truth;

  Eigen::Index steps() const { return x_bar.rows(); }
  Eigen::Index features() const { return x_bar.cols(); }
};

struct NormalizationStats {
  Vector min;
  Vector max;
  std::vector<bool> degenerate;
  double eps = 1e-8;

  Eigen::Index features() const { return min.size(); }
  double normalize(Eigen::Index d, double x) const;
  double denormalize(Eigen::Index d, double y) const;
};

MaskMatrix build_mask(const RawSeries &raw);

/// δ_1 = 0; δ_t = s_t − s_{t−1} when the feature was observed at t−1,
/// otherwise s_t − s_{t−1} + δ_{t−1}. Throws on decreasing timestamps.
DeltaMatrix build_delta(std::span<const double> timestamps,
                        const MaskMatrix &mask);

NormalizationStats fit_normalization(const RawSeries &raw);
NormalizationStats fit_normalization(std::span<const TimeSeriesWindow> windows,
                                     const std::vector<std::string> &names = {});

TimeSeriesWindow normalize(const TimeSeriesWindow &window,
                           const NormalizationStats &stats);
TimeSeriesWindow denormalize(const TimeSeriesWindow &window,
                             const NormalizationStats &stats);
/// Applies the min-max map (or its inverse) to every cell of a T x D matrix.
Matrix normalize_values(const Matrix &values, const NormalizationStats &stats);
Matrix denormalize_values(const Matrix &values, const NormalizationStats &stats);

/// Builds a window from a T x D block (NaN = absent) and its timestamps.
TimeSeriesWindow make_window(const Matrix &values,
                             std::span<const double> timestamps);

std::vector<TimeSeriesWindow> make_windows(const RawSeries &raw,
                                           Eigen::Index length,
                                           Eigen::Index stride);

/// Reverses time: rows flipped, gaps mirrored, Δ rebuilt for reversed order.
TimeSeriesWindow reversed(const TimeSeriesWindow &window);

struct HoldoutResult {
  TimeSeriesWindow train;
  EvalTargets targets;
};

/// Hides exactly floor(ratio * #observed) observed cells, uniformly at random.
HoldoutResult holdout_mask(const TimeSeriesWindow &window, double ratio,
                           std::uint64_t seed);

/// Same selection rule applied globally across all windows. The returned
/// windows carry their targets in `ground_truth`.
std::vector<TimeSeriesWindow>
holdout_dataset(std::span<const TimeSeriesWindow> windows, double ratio,
                std::uint64_t seed);

/// Inverse of holdout_mask: puts the targets back as observed cells.
TimeSeriesWindow restore_targets(const TimeSeriesWindow &train,
                                 const EvalTargets &targets);

RawSeries load_csv(const std::string &path);
RawSeries parse_csv(std::istream &in);
void write_csv(const std::string &path, const RawSeries &raw);
void write_csv(std::ostream &out, const RawSeries &raw);

/// Debug dump: "T,D" header line, then sections values/mask/delta, row-major.
void write_window_dump(std::ostream &out, const TimeSeriesWindow &window);
TimeSeriesWindow read_window_dump(std::istream &in);

} // namespace sting
