// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Experiment configuration: flat `key = value` text with typed
 *         validation. Later sources override earlier ones
 *         (defaults < config file < command-line overrides).
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sting {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // data
  std::string data_source = "synthetic"; // "csv" | "synthetic"
  std::string data_path;
  long synthetic_windows = 2000;
  long synthetic_steps = 48;
  long synthetic_features = 5;
  double synthetic_noise_sd = 0.05;
  bool synthetic_irregular = false;

  long window_length = 48;
  long window_stride = 48;

  // model
  long hidden = 64;
  long disc_hidden = 64;
  long heads = 4;
  bool attention = true;
  bool backward = true;

  double lambda_r = 10.0;
  double lambda_c = 1.0;

  // training
  double lr_g = 1e-3;
  double lr_d = 1e-4;
  long batch_size = 128;
  long pretrain_epochs = 10;
  long adversarial_epochs = 30;
  double hint_ratio = 0.1;
  double grad_clip = 5.0;
  double disc_weight_clip = 0.0; // 0 = off
  long checkpoint_every = 5;     // epochs; 0 = final checkpoint only

  double holdout_ratio = 0.2;
  double noise_sd = 0.01;

  bool search_enabled = true;
  long search_iterations = 100;
  double search_step_size = 0.01;

  long knn_k = 10;

  // downstream regression protocol
  long downstream_target = -1; // feature index; -1 = last feature
  std::vector<double> downstream_ratios = {0.0, 0.5};
  long downstream_epochs = 20;
  long downstream_hidden = 64;
  double downstream_dropout = 0.3;
  double downstream_lr = 1e-3;
  double downstream_train_fraction = 0.8;

  std::vector<double> curve_ratios = {0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> ablation_variants = {"full", "no_attention",
                                                "no_search", "no_backward"};

  bool log_wall_time = false;

  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string output_dir;

  /// Applies one `key = value` assignment. Throws ConfigError naming the key.
  void set(const std::string &key, const std::string &value);

  /// Throws ConfigError naming the first missing or invalid field.
  void validate() const;

  /// Canonical text form; parse(serialize()) reproduces the config.
  std::string serialize() const;
};

/// Reads `key = value` lines; blank lines and `#` comments are ignored.
void apply_config_text(ExperimentConfig &config, std::istream &in,
                       const std::string &source = "<config>");
void apply_config_file(ExperimentConfig &config, const std::string &path);

/// "key=value" from the command line.
void apply_override(ExperimentConfig &config, const std::string &assignment);

std::vector<std::string> config_keys();

} // namespace sting
