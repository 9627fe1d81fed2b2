// SPDX-License-Identifier: Apache-2.0
/**
 * @file   checkpoint.hpp
 * @brief  Binary checkpoint: magic, a key=value manifest, then named
 *         tensors (rows, cols, little-endian float64, row-major).
 */
#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sting/core_data.hpp"
#include "sting/training.hpp"

namespace sting {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  TrainState state;
  NormalizationStats norm;
  std::vector<std::string> feature_names;
  /// Serialized ExperimentConfig the model was trained with.
  std::string config_text;
};

void save_checkpoint(std::ostream &out, const Checkpoint &ck);
void save_checkpoint(const std::string &path, const Checkpoint &ck);

/// Fails with CheckpointError on bad magic, truncation, missing or unknown
/// tensors, or any shape mismatch.
Checkpoint load_checkpoint(std::istream &in);
Checkpoint load_checkpoint(const std::string &path);

} // namespace sting
