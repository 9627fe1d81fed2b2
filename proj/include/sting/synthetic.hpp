// SPDX-License-Identifier: Apache-2.0
/**
 * @file   synthetic.hpp
 * @brief  Seeded sinusoid-mixture series and MCAR corruption.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "sting/core_data.hpp"

namespace sting {

struct SinusoidSpec {
  Eigen::Index windows = 2000;
  Eigen::Index steps = 48;
  Eigen::Index features = 5;
  double noise_sd = 0.05;
  std::uint64_t seed = 0;
  /// Off-diagonal scale of the feature mixing matrix; 0 gives identity.
  double mixing = 0.3;
  double period_min = 8.0;
  double period_max = 32.0;
  /// Keep each regular grid point with probability 1/2 so gaps vary.
  bool irregular = false;
};

/// Per-feature periods and amplitudes are fixed for the dataset; phases are
/// drawn per window. Every series is fully observed.
std::vector<RawSeries> gen_sinusoid_mix(const SinusoidSpec &spec);
std::vector<RawSeries> gen_sinusoid_mix(Eigen::Index n_windows, Eigen::Index T,
                                        Eigen::Index D, double noise_sd,
                                        std::uint64_t seed);

/// Removes each cell independently with probability `ratio`.
RawSeries corrupt_mcar(const RawSeries &series, double ratio,
                       std::uint64_t seed);

/// Joins series end to end. Later timestamps are shifted so the result is
/// strictly increasing with one unit between consecutive pieces.
RawSeries concatenate(const std::vector<RawSeries> &parts);

} // namespace sting
