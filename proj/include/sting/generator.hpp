// SPDX-License-Identifier: Apache-2.0
/**
 * @file   generator.hpp
 * @brief  Directional generator: self-attention over the noise-filled input,
 *         decayed main GRU cell queried through temporal attention, and an
 *         undecayed generation cell that emits x̂_t.
 */
#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sting/attention.hpp"
#include "sting/autograd.hpp"
#include "sting/core_data.hpp"
#include "sting/layers.hpp"

namespace sting {

enum class Direction { forward, backward };

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GeneratorShape {
  Eigen::Index features = 0;
  Eigen::Index hidden = 64;
  Eigen::Index heads = 4;
  /// When false both attention modules are bypassed and the GRU input is
  /// the step vector alone.
  bool attention = true;
};

struct GeneratorParams {
  GeneratorShape shape;
  MultiHeadParams self_attention;
  TemporalAttentionParams temporal_attention;
  DecayParams decay;
  GruCellParams main_cell;
  GruCellParams generation_cell;
  Parameter out_w; // D x hidden
  Parameter out_b; // D x 1

  static GeneratorParams init(const std::string &prefix,
                              const GeneratorShape &shape, Rng &rng);
  ParameterList parameters();
};

struct GeneratorOutput {
  Matrix x_hat_raw;     // T x D
  Matrix x_hat_refined; // T x D, equals x̄ at observed cells
  Matrix hidden;        // T x hidden (main cell h_t)
  Matrix hidden_gen;    // T x hidden (generation cell hg_t)
};

GeneratorOutput generate_sequence(const TimeSeriesWindow &window,
                                  const Matrix &noise,
                                  const GeneratorParams &params,
                                  Direction direction);

/// Σ m (x − x̂)² / max(1, Σ m).
double loss_reconstruction(const Matrix &x, const Matrix &x_hat_raw,
                           const MaskMatrix &m);
/// Mean |fwd − bwd| over all cells; the backward output in original order.
double loss_consistency(const Matrix &x_hat_fwd, const Matrix &x_hat_bwd);
/// −mean of m̂ over originally-missing cells, 0 if there are none.
double loss_generator_adversarial(const Matrix &m_hat, const MaskMatrix &m);
double loss_generator_total(double recon, double consistency, double adversarial,
                            double lambda_r, double lambda_c);

/// B windows packed as D x T*B sequence matrices (column t*B + b).
struct SequenceBatch {
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;
  Eigen::Index features = 0;
  Matrix x_bar;
  Matrix mask;
  Matrix delta;
};

/// Forward-time batch and its time-reversed counterpart (Δ rebuilt).
struct BatchPair {
  SequenceBatch forward;
  SequenceBatch backward;
};

/// Packs T x D matrices of B windows into D x T*B.
Matrix pack_sequences(std::span<const Matrix> per_window);
/// Inverse of pack_sequences.
std::vector<Matrix> unpack_sequences(const Matrix &packed, Eigen::Index steps,
                                     Eigen::Index batch);

SequenceBatch pack_windows(std::span<const TimeSeriesWindow> windows);
BatchPair pack_pair(std::span<const TimeSeriesWindow> windows);

namespace ad {

struct GeneratorTrace {
  Var x_hat_raw;
  Var x_hat_refined;
  std::vector<Var> hidden;
  std::vector<Var> hidden_gen;
  /// Per-step D×B raw estimates, the nodes fed back into the next step.
  std::vector<Var> steps;
};

/// Runs the recurrence in the batch's own time order.
GeneratorTrace run_generator(Tape &t, const GeneratorParams &params, bool track,
                             const SequenceBatch &batch, Var noise);

/// Direction-aware wrapper: the backward generator sees reversed inputs and
/// noise; its outputs are returned in original time order.
GeneratorTrace generate(Tape &t, const GeneratorParams &params, bool track,
                        const BatchPair &pair, Var noise, Direction direction);

} // namespace ad
} // namespace sting
