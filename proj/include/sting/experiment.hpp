// SPDX-License-Identifier: Apache-2.0
/**
 * @file   experiment.hpp
 * @brief  Dataset assembly and the command implementations behind the CLI.
 *
 * Every command writes its outputs under config.output_dir together with
 * the resolved config (config.txt).
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sting/checkpoint.hpp"
#include "sting/config.hpp"
#include "sting/evaluation.hpp"

namespace sting {

/// Independent sub-seed for one named use of the root seed.
enum class SeedStream : std::uint64_t {
  data = 1,
  holdout = 2,
  inference = 3,
  split = 4,
  corruption = 5,
  downstream = 6,
};
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream);

struct Dataset {
  RawSeries raw;
  NormalizationStats norm;
  std::vector<TimeSeriesWindow> windows; // normalized
};

/// Synthetic generation or CSV load, then normalization and windowing.
Dataset load_dataset(const ExperimentConfig &config);

/// Windows with eval.holdout_ratio of their observed cells hidden; the
/// hidden cells are kept as ground_truth.
std::vector<TimeSeriesWindow> holdout_windows(const Dataset &data,
                                              const ExperimentConfig &config);

/// Creates the output directory and writes config.txt.
void prepare_output(const ExperimentConfig &config);

std::string checkpoint_path(const ExperimentConfig &config);
std::string metrics_path(const ExperimentConfig &config);

struct TrainOutcome {
  TrainState state;
  std::string checkpoint;
  std::string metrics;
};

/// Trains on the holdout windows; writes checkpoint.bin and metrics.jsonl.
/// With `resume`, continues from an existing checkpoint in output.dir.
TrainOutcome cmd_train(const ExperimentConfig &config, bool resume = false);

struct ImputeOutcome {
  std::string imputed_csv;
  std::string provenance_csv;
  long generated_cells = 0;
  long out_of_range_cells = 0;
};

ImputeOutcome cmd_impute(const ExperimentConfig &config,
                         const std::string &checkpoint,
                         const std::string &input_csv);

/// STING and the baselines on the same holdout the model was trained with.
std::vector<ScoreRow> cmd_evaluate(const ExperimentConfig &config,
                                   const std::string &checkpoint);

std::vector<AblationRow> cmd_ablate(const ExperimentConfig &config);

DownstreamTable cmd_downstream(const ExperimentConfig &config);

struct CurvePoint {
  double ratio = 0.0;
  std::string imputer;
  double rmse = 0.0;
};

/// Sweeps curves.ratios; STING is retrained for each ratio.
std::vector<CurvePoint> cmd_curves(const ExperimentConfig &config);

/// Writes the configured synthetic dataset (optionally MCAR-corrupted).
std::string cmd_gen_data(const ExperimentConfig &config,
                         const std::string &out_path, double missing_ratio);

} // namespace sting
