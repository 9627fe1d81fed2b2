// SPDX-License-Identifier: Apache-2.0
#include "sting/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sting/training.hpp"

namespace sting {
namespace {

void copy_block(Matrix &dst, const Matrix &src, Eigen::Index block,
                Eigen::Index batch) {
  for (Eigen::Index c = block; c < src.cols(); c += batch)
    dst.col(c) = src.col(c);
}

} // namespace

SearchResult gradient_descent_search(const Matrix &z_init, Eigen::Index batch,
                                     const BatchObjective &objective,
                                     long iterations, double step_size) {
  if (batch < 1 || z_init.cols() % batch != 0)
    throw std::invalid_argument("search: noise columns must split into blocks");
  if (iterations < 0)
    throw std::invalid_argument("search: iterations must be >= 0");
  SearchResult r;
  r.z = z_init;
  const bool moves = iterations > 0 && step_size != 0.0;
  Matrix z = z_init;
  Matrix g;
  RowVector loss = objective(z, moves ? &g : nullptr);
  r.initial_loss = loss;
  r.best_loss = loss;
  if (!loss.allFinite()) {
    r.non_finite = true;
    return r;
  }
  if (!moves)
    return r;

  for (long it = 0; it < iterations; ++it) {
    if (!g.allFinite()) {
      r.non_finite = true;
      break;
    }
    z -= step_size * g;
    const bool last = it + 1 == iterations;
    loss = objective(z, last ? nullptr : &g);
    ++r.iterations;
    if (!loss.allFinite()) {
      r.non_finite = true;
      break;
    }
    for (Eigen::Index b = 0; b < batch; ++b)
      if (loss(b) < r.best_loss(b)) {
        r.best_loss(b) = loss(b);
        copy_block(r.z, z, b, batch);
      }
  }
  return r;
}

BatchObjective noise_objective(const StingModel &model, const BatchPair &pair,
                               const LossWeights &weights) {
  return [&model, &pair, weights](const Matrix &z, Matrix *grad) -> RowVector {
    const SequenceBatch &fb = pair.forward;
    const Matrix hint = Matrix::Constant(fb.mask.rows(), fb.mask.cols(), 0.5);
    ad::Tape t;
    const ad::Var zv = t.variable(z);
    try {
      const ad::GeneratorObjective o =
          ad::generator_objective(t, model, false, pair, zv, &hint, weights);
      RowVector per = t.value(o.total).row(0);
      if (grad != nullptr) {
        t.backward(ad::sum(t, o.total));
        *grad = t.grad(zv);
      }
      return per;
    } catch (const NumericError &) {
      return RowVector::Constant(fb.batch,
                                 std::numeric_limits<double>::quiet_NaN());
    }
  };
}

SearchResult search_noise(const StingModel &model,
                          std::span<const TimeSeriesWindow> batch,
                          const Matrix &z_init, long iterations,
                          double step_size, const LossWeights &weights) {
  const BatchPair pair = pack_pair(batch);
  if (z_init.rows() != pair.forward.features ||
      z_init.cols() != pair.forward.steps * pair.forward.batch)
    throw std::invalid_argument("search_noise: noise shape mismatch");
  return gradient_descent_search(z_init, pair.forward.batch,
                                 noise_objective(model, pair, weights),
                                 iterations, step_size);
}

Matrix average_directions(const Matrix &fwd_refined, const Matrix &bwd_refined,
                          const Matrix &x_bar, const MaskMatrix &mask) {
  if (fwd_refined.rows() != bwd_refined.rows() ||
      fwd_refined.cols() != bwd_refined.cols() ||
      x_bar.rows() != fwd_refined.rows() || x_bar.cols() != fwd_refined.cols() ||
      mask.rows() != x_bar.rows() || mask.cols() != x_bar.cols())
    throw std::invalid_argument("impute: shape mismatch");
  const Matrix mean = 0.5 * (fwd_refined + bwd_refined);
  return (mask.array() != 0.0).select(x_bar, mean);
}

namespace {

ImputationResult finish(const TimeSeriesWindow &w, Matrix fwd, Matrix bwd) {
  ImputationResult r;
  r.values = average_directions(fwd, bwd, w.x_bar, w.mask);
  r.provenance = (1.0 - w.mask.array()).matrix();
  r.out_of_range =
      ((r.values.array() < 0.0) || (r.values.array() > 1.0)).cast<double>();
  r.forward = std::move(fwd);
  r.backward = std::move(bwd);
  return r;
}

} // namespace

ImputationResult impute(const TimeSeriesWindow &window,
                        const GeneratorParams &params_fwd,
                        const GeneratorParams *params_bwd, const Matrix &z) {
  if (z.rows() != window.steps() || z.cols() != window.features())
    throw std::invalid_argument("impute: noise must be T x D");
  Matrix fwd =
      generate_sequence(window, z, params_fwd, Direction::forward).x_hat_refined;
  Matrix bwd = params_bwd != nullptr
                   ? generate_sequence(window, z, *params_bwd,
                                       Direction::backward)
                         .x_hat_refined
                   : fwd;
  return finish(window, std::move(fwd), std::move(bwd));
}

std::vector<ImputationResult>
impute_batch(const StingModel &model, std::span<const TimeSeriesWindow> batch,
             const Matrix &z) {
  const BatchPair pair = pack_pair(batch);
  const Eigen::Index T = pair.forward.steps;
  const Eigen::Index B = pair.forward.batch;
  if (z.rows() != pair.forward.features || z.cols() != T * B)
    throw std::invalid_argument("impute: noise shape mismatch");
  ad::Tape t;
  const ad::Var zv = t.constant(z);
  const auto fwd = unpack_sequences(
      t.value(ad::generate(t, model.forward, false, pair, zv,
                           Direction::forward)
                  .x_hat_refined),
      T, B);
  std::vector<Matrix> bwd;
  if (model.config.backward)
    bwd = unpack_sequences(
        t.value(ad::generate(t, model.backward, false, pair, zv,
                             Direction::backward)
                    .x_hat_refined),
        T, B);
  std::vector<ImputationResult> out;
  out.reserve(B);
  for (Eigen::Index b = 0; b < B; ++b)
    out.push_back(finish(batch[b], fwd[b],
                         model.config.backward ? bwd[b] : fwd[b]));
  return out;
}

InferenceReport impute_windows(const StingModel &model,
                               std::span<const TimeSeriesWindow> windows,
                               const InferenceOptions &options, Rng &rng) {
  InferenceReport report;
  const std::size_t bs = static_cast<std::size_t>(std::max<Eigen::Index>(1, options.batch_size));
  for (std::size_t i = 0; i < windows.size(); i += bs) {
    const auto batch = windows.subspan(i, std::min(bs, windows.size() - i));
    const Eigen::Index T = batch.front().steps();
    const Eigen::Index D = batch.front().features();
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    Matrix z = sample_noise(D, T * B, options.noise_sd, rng);
    bool warning = false;
    if (options.search) {
      const SearchResult s = search_noise(model, batch, z, options.iterations,
                                          options.step_size, options.weights);
      z = s.z;
      warning = s.non_finite;
      for (Eigen::Index b = 0; b < B; ++b) {
        report.loss_initial.push_back(s.initial_loss(b));
        report.loss_final.push_back(s.best_loss(b));
      }
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      report.loss_initial.insert(report.loss_initial.end(), B, nan);
      report.loss_final.insert(report.loss_final.end(), B, nan);
    }
    for (ImputationResult &r : impute_batch(model, batch, z)) {
      r.search_warning = warning;
      report.results.push_back(std::move(r));
    }
  }
  return report;
}

SeriesImputation impute_series(const StingModel &model,
                               const NormalizationStats &norm,
                               const RawSeries &raw, Eigen::Index window_length,
                               const InferenceOptions &options, Rng &rng) {
  if (raw.features() != model.config.features)
    throw std::invalid_argument(
        "impute: input has " + std::to_string(raw.features()) +
        " features, model expects " + std::to_string(model.config.features));
  if (norm.features() != raw.features())
    throw std::invalid_argument("impute: normalization stats do not match");
  std::vector<TimeSeriesWindow> windows;
  for (const TimeSeriesWindow &w :
       make_windows(raw, window_length, window_length))
    windows.push_back(normalize(w, norm));
  const InferenceReport rep = impute_windows(model, windows, options, rng);

  SeriesImputation out;
  out.imputed = raw;
  out.provenance = Matrix::Zero(raw.steps(), raw.features());
  out.out_of_range = Matrix::Zero(raw.steps(), raw.features());
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const TimeSeriesWindow &w = windows[k];
    const Matrix values = denormalize_values(rep.results[k].values, norm);
    for (Eigen::Index i = 0; i < w.valid_steps; ++i) {
      const Eigen::Index row = w.origin + i;
      for (Eigen::Index d = 0; d < raw.features(); ++d) {
        if (!std::isnan(raw.values(row, d)))
          continue;
        out.imputed.values(row, d) = values(i, d);
        out.provenance(row, d) = 1.0;
        out.out_of_range(row, d) = rep.results[k].out_of_range(i, d);
      }
    }
  }
  return out;
}

} // namespace sting
