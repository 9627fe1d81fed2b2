// SPDX-License-Identifier: Apache-2.0
/**
 * @file   training.hpp
 * @brief  Generator pre-training, alternating D/G updates and the epoch
 *         driver with periodic checkpoints.
 */
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sting/config.hpp"
#include "sting/model.hpp"
#include "sting/optim.hpp"

namespace sting {

struct TrainOptions {
  LossWeights weights;
  double lr_g = 1e-3;
  double lr_d = 1e-4;
  Eigen::Index batch_size = 128;
  double hint_ratio = 0.1;
  double grad_clip = 5.0;
  double disc_weight_clip = 0.0;
  double noise_sd = 0.01;
  bool log_wall_time = false;

  static TrainOptions from_config(const ExperimentConfig &config);
};

/// Batch-mean losses of one optimizer step. Adversarial and discriminator
/// terms are 0 during pre-training.
struct StepLosses {
  bool adversarial = false;
  double recon_fwd = 0.0;
  double recon_bwd = 0.0;
  double consistency = 0.0;
  double adv_fwd = 0.0;
  double adv_bwd = 0.0;
  double gen_total = 0.0;
  double disc = 0.0;
};

struct EpochMetrics {
  long epoch = 0;
  long step = 0; // cumulative step count at the end of the epoch
  bool adversarial = false;
  StepLosses mean;
  double wall_time = 0.0;
};

struct TrainState {
  StingModel model;
  Adam opt_g;
  Adam opt_d;
  long epoch = 0; // completed epochs, pre-training included
  long step = 0;  // optimizer steps taken, pre-training included
  long d_updates = 0;
  long g_updates = 0;
  Rng rng;
  std::vector<StepLosses> history; // one entry per step
  std::vector<EpochMetrics> epochs;

  static TrainState init(const ModelConfig &model, const TrainOptions &options,
                         std::uint64_t seed);
};

ModelConfig model_config_from(const ExperimentConfig &config,
                              Eigen::Index features);

/// Gaussian noise (D x T*B) with the given standard deviation.
Matrix sample_noise(Eigen::Index features, Eigen::Index columns, double sd,
                    Rng &rng);

/// One generator-only step on λ_r ΣL_R + λ_c L_C.
StepLosses pretrain_step(TrainState &state,
                         std::span<const TimeSeriesWindow> batch,
                         const TrainOptions &options);

/// Runs `epochs` shuffled passes of pretrain_step. Throws on empty data.
void pretrain_generators(TrainState &state,
                         std::span<const TimeSeriesWindow> data, long epochs,
                         const TrainOptions &options);

/// One discriminator update followed by one generator update, with fresh
/// noise and hint. Throws NumericError naming a non-finite loss term.
StepLosses train_step(TrainState &state,
                      std::span<const TimeSeriesWindow> batch,
                      const TrainOptions &options);

/// Runs one shuffled epoch; pre-training or adversarial by `adversarial`.
EpochMetrics run_epoch(TrainState &state,
                       std::span<const TimeSeriesWindow> data,
                       const TrainOptions &options, bool adversarial);

using EpochCallback = std::function<void(const TrainState &)>;

/// Continues `state` until it has completed pretrain + adversarial epochs
/// from the config. `on_epoch` runs after every epoch.
void fit(TrainState &state, const ExperimentConfig &config,
         std::span<const TimeSeriesWindow> data,
         const EpochCallback &on_epoch = {});

/// Fresh state seeded from config.seed, then fit.
TrainState fit(const ExperimentConfig &config,
               std::span<const TimeSeriesWindow> data,
               const EpochCallback &on_epoch = {});

/// One JSON object per line.
std::string metrics_line(const EpochMetrics &m);
void write_metrics_log(const std::string &path,
                       const std::vector<EpochMetrics> &epochs);

} // namespace sting
