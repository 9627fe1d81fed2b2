// SPDX-License-Identifier: Apache-2.0
#include "sting/generator.hpp"

#include <cmath>

namespace sting {

GeneratorParams GeneratorParams::init(const std::string &prefix,
                                      const GeneratorShape &shape, Rng &rng) {
  if (shape.features < 1 || shape.hidden < 1 || shape.heads < 1)
    throw std::invalid_argument("generator: features, hidden and heads must "
                                "be positive");
  GeneratorParams p;
  p.shape = shape;
  const Eigen::Index D = shape.features;
  const Eigen::Index H = shape.hidden;
  if (shape.attention) {
    p.self_attention =
        MultiHeadParams::init(prefix + "/self_attention", D, shape.heads, rng);
    p.temporal_attention = TemporalAttentionParams::init(
        prefix + "/temporal_attention", D, H, shape.heads, rng);
  }
  p.decay = DecayParams::init(prefix + "/decay", D, H, rng);
  const Eigen::Index input = shape.attention ? 2 * D : D;
  p.main_cell = GruCellParams::init(prefix + "/main_cell", input, H, rng);
  p.generation_cell =
      GruCellParams::init(prefix + "/generation_cell", input, H, rng);
  p.out_w = Parameter(prefix + "/w_out", uniform_init(D, H, H, rng));
  p.out_b = Parameter(prefix + "/b_out", Matrix::Zero(D, 1));
  return p;
}

ParameterList GeneratorParams::parameters() {
  ParameterList out;
  if (shape.attention) {
    for (Parameter *p : self_attention.parameters())
      out.push_back(p);
    for (Parameter *p : temporal_attention.parameters())
      out.push_back(p);
  }
  for (Parameter *p : decay.parameters())
    out.push_back(p);
  for (Parameter *p : main_cell.parameters())
    out.push_back(p);
  for (Parameter *p : generation_cell.parameters())
    out.push_back(p);
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

Matrix pack_sequences(std::span<const Matrix> per_window) {
  if (per_window.empty())
    return {};
  const Eigen::Index T = per_window.front().rows();
  const Eigen::Index D = per_window.front().cols();
  const auto B = static_cast<Eigen::Index>(per_window.size());
  Matrix out(D, T * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Matrix &m = per_window[b];
    if (m.rows() != T || m.cols() != D)
      throw std::invalid_argument("pack_sequences: windows differ in shape");
    for (Eigen::Index t = 0; t < T; ++t)
      out.col(t * B + b) = m.row(t).transpose();
  }
  return out;
}

std::vector<Matrix> unpack_sequences(const Matrix &packed, Eigen::Index steps,
                                     Eigen::Index batch) {
  if (packed.cols() != steps * batch)
    throw std::invalid_argument("unpack_sequences: columns != steps * batch");
  std::vector<Matrix> out(batch, Matrix(steps, packed.rows()));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < steps; ++t)
      out[b].row(t) = packed.col(t * batch + b).transpose();
  return out;
}

SequenceBatch pack_windows(std::span<const TimeSeriesWindow> windows) {
  if (windows.empty())
    throw std::invalid_argument("pack_windows: empty batch");
  SequenceBatch s;
  s.steps = windows.front().steps();
  s.features = windows.front().features();
  s.batch = static_cast<Eigen::Index>(windows.size());
  std::vector<Matrix> x, m, d;
  for (const auto &w : windows) {
    if (w.steps() != s.steps || w.features() != s.features)
      throw std::invalid_argument("pack_windows: windows differ in shape");
    x.push_back(w.x_bar);
    m.push_back(w.mask);
    d.push_back(w.delta);
  }
  s.x_bar = pack_sequences(x);
  s.mask = pack_sequences(m);
  s.delta = pack_sequences(d);
  return s;
}

BatchPair pack_pair(std::span<const TimeSeriesWindow> windows) {
  std::vector<TimeSeriesWindow> rev;
  rev.reserve(windows.size());
  for (const auto &w : windows)
    rev.push_back(reversed(w));
  return {pack_windows(windows), pack_windows(rev)};
}

GeneratorOutput generate_sequence(const TimeSeriesWindow &window,
                                  const Matrix &noise,
                                  const GeneratorParams &params,
                                  Direction direction) {
  if (noise.rows() != window.steps() || noise.cols() != window.features())
    throw std::invalid_argument("generate_sequence: noise must be T x D");
  if (window.features() != params.shape.features)
    throw std::invalid_argument("generate_sequence: window has " +
                                std::to_string(window.features()) +
                                " features, generator expects " +
                                std::to_string(params.shape.features));
  const TimeSeriesWindow one[] = {window};
  const BatchPair pair = pack_pair(one);
  const Matrix noise_block[] = {noise};
  ad::Tape t;
  const ad::Var z = t.constant(pack_sequences(noise_block));
  const auto trace = ad::generate(t, params, false, pair, z, direction);
  GeneratorOutput out;
  out.x_hat_raw = unpack_sequences(t.value(trace.x_hat_raw), window.steps(), 1)[0];
  out.x_hat_refined =
      unpack_sequences(t.value(trace.x_hat_refined), window.steps(), 1)[0];
  const Eigen::Index H = params.shape.hidden;
  out.hidden.resize(window.steps(), H);
  out.hidden_gen.resize(window.steps(), H);
  for (Eigen::Index s = 0; s < window.steps(); ++s) {
    out.hidden.row(s) = t.value(trace.hidden[s]).col(0).transpose();
    out.hidden_gen.row(s) = t.value(trace.hidden_gen[s]).col(0).transpose();
  }
  return out;
}

double loss_reconstruction(const Matrix &x, const Matrix &x_hat_raw,
                           const MaskMatrix &m) {
  if (x.rows() != x_hat_raw.rows() || x.cols() != x_hat_raw.cols() ||
      m.rows() != x.rows() || m.cols() != x.cols())
    throw std::invalid_argument("loss_reconstruction: shape mismatch");
  const double num = (m.array() * (x - x_hat_raw).array().square()).sum();
  return num / std::max(1.0, m.sum());
}

double loss_consistency(const Matrix &x_hat_fwd, const Matrix &x_hat_bwd) {
  if (x_hat_fwd.rows() != x_hat_bwd.rows() ||
      x_hat_fwd.cols() != x_hat_bwd.cols())
    throw std::invalid_argument("loss_consistency: shape mismatch");
  if (x_hat_fwd.size() == 0)
    return 0.0;
  return (x_hat_fwd - x_hat_bwd).cwiseAbs().mean();
}

double loss_generator_adversarial(const Matrix &m_hat, const MaskMatrix &m) {
  if (m_hat.rows() != m.rows() || m_hat.cols() != m.cols())
    throw std::invalid_argument("loss_generator_adversarial: shape mismatch");
  // Same accumulation order as loss_discriminator's first term.
  double sum = 0.0, count = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) == 0.0) {
        sum += m_hat(i, j);
        count += 1.0;
      }
  return count > 0.0 ? -(sum / count) : 0.0;
}

double loss_generator_total(double recon, double consistency, double adversarial,
                            double lambda_r, double lambda_c) {
  return lambda_r * recon + lambda_c * consistency + adversarial;
}

namespace ad {

GeneratorTrace run_generator(Tape &t, const GeneratorParams &params, bool track,
                             const SequenceBatch &batch, Var noise) {
  const Eigen::Index T = batch.steps;
  const Eigen::Index B = batch.batch;
  const Eigen::Index H = params.shape.hidden;
  if (batch.features != params.shape.features)
    throw std::invalid_argument("generator: batch has " +
                                std::to_string(batch.features) +
                                " features, generator expects " +
                                std::to_string(params.shape.features));
  if (t.value(noise).rows() != batch.features || t.value(noise).cols() != T * B)
    throw std::invalid_argument("generator: noise shape mismatch");

  const Var x_bar = t.constant(batch.x_bar);
  const Var x_tilde = blend(t, batch.mask, x_bar, noise);

  MultiHeadVars temporal;
  ProjectedKeys context_kv;
  Var query_w, query_b;
  if (params.shape.attention) {
    const MultiHeadVars self = bind(t, params.self_attention, track);
    const Var context = multi_head(t, self, x_tilde, x_tilde, x_tilde, T, T, B);
    temporal = bind(t, params.temporal_attention.attention, track);
    context_kv = project_keys(t, temporal, context, context, T);
    query_w = t.parameter(params.temporal_attention.query_w, track);
    query_b = t.parameter(params.temporal_attention.query_b, track);
  }
  const Var decay_w = t.parameter(params.decay.w, track);
  const Var decay_b = t.parameter(params.decay.b, track);
  const GruVars main = bind(t, params.main_cell, track);
  const GruVars gen = bind(t, params.generation_cell, track);
  const Var out_w = t.parameter(params.out_w, track);
  const Var out_b = t.parameter(params.out_b, track);

  GeneratorTrace trace;
  trace.hidden.reserve(T);
  trace.hidden_gen.reserve(T);
  std::vector<Var> outputs;
  outputs.reserve(T);

  Var h = t.constant(Matrix::Zero(H, B));
  Var hg = h;
  Var step_in = slice_cols(t, x_tilde, 0, B);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Var delta = t.constant(batch.delta.middleCols(s * B, B));
    const Var gamma = decay(t, decay_w, decay_b, delta);
    const Var h_decayed = mul(t, gamma, h);
    Var x_in = step_in;
    if (params.shape.attention) {
      const Var q = affine(t, query_w, h_decayed, query_b);
      const Var a = attend(t, temporal, q, 1, context_kv, B);
      x_in = concat_rows(t, {step_in, a});
    }
    h = gru_cell(t, x_in, h_decayed, main);
    hg = gru_cell(t, x_in, hg, gen);
    const Var x_hat = affine(t, out_w, hg, out_b);
    if (!t.value(x_hat).allFinite())
      throw NumericError("generator: non-finite output at step " +
                         std::to_string(s));
    trace.hidden.push_back(h);
    trace.hidden_gen.push_back(hg);
    outputs.push_back(x_hat);
    if (s + 1 < T) {
      // Observed cells feed the ground truth, missing cells the estimate.
      const Var next_bar = t.constant(batch.x_bar.middleCols((s + 1) * B, B));
      step_in = blend(t, batch.mask.middleCols((s + 1) * B, B), next_bar, x_hat);
    }
  }
  trace.x_hat_raw = concat_cols(t, outputs);
  trace.steps = std::move(outputs);
  trace.x_hat_refined = blend(t, batch.mask, x_bar, trace.x_hat_raw);
  return trace;
}

GeneratorTrace generate(Tape &t, const GeneratorParams &params, bool track,
                        const BatchPair &pair, Var noise, Direction direction) {
  if (direction == Direction::forward)
    return run_generator(t, params, track, pair.forward, noise);
  const Eigen::Index T = pair.backward.steps;
  const Eigen::Index B = pair.backward.batch;
  GeneratorTrace rev = run_generator(t, params, track, pair.backward,
                                     reverse_time(t, noise, T, B));
  GeneratorTrace out;
  out.x_hat_raw = reverse_time(t, rev.x_hat_raw, T, B);
  out.x_hat_refined = reverse_time(t, rev.x_hat_refined, T, B);
  out.hidden.assign(rev.hidden.rbegin(), rev.hidden.rend());
  out.hidden_gen.assign(rev.hidden_gen.rbegin(), rev.hidden_gen.rend());
  out.steps.assign(rev.steps.rbegin(), rev.steps.rend());
  return out;
}

} // namespace ad
} // namespace sting
