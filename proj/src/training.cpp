// SPDX-License-Identifier: Apache-2.0
#include "sting/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace sting {
namespace {

double batch_mean(const ad::Tape &t, ad::Var v) {
  return v.valid() ? t.value(v).mean() : 0.0;
}

void check_finite(double value, const char *term, long step) {
  if (!std::isfinite(value))
    throw NumericError("training: non-finite " + std::string(term) +
                       " at step " + std::to_string(step));
}

ad::Var mean_over_batch(ad::Tape &t, ad::Var row) {
  const Eigen::Index B = t.value(row).cols();
  return ad::weighted_sum(t, row, RowVector::Constant(B, 1.0 / B));
}

StepLosses generator_losses(const ad::Tape &t, const ad::GeneratorObjective &o,
                            long step) {
  StepLosses s;
  s.recon_fwd = batch_mean(t, o.recon_fwd);
  s.recon_bwd = batch_mean(t, o.recon_bwd);
  s.consistency = batch_mean(t, o.consistency);
  s.adv_fwd = batch_mean(t, o.adv_fwd);
  s.adv_bwd = batch_mean(t, o.adv_bwd);
  s.gen_total = batch_mean(t, o.total);
  check_finite(s.recon_fwd, "L_R_fwd", step);
  check_finite(s.recon_bwd, "L_R_bwd", step);
  check_finite(s.consistency, "L_C", step);
  check_finite(s.adv_fwd, "L_W_fwd", step);
  check_finite(s.adv_bwd, "L_W_bwd", step);
  check_finite(s.gen_total, "L_G", step);
  return s;
}

void update(ad::Tape &t, ad::Var loss, const ParameterList &params, Adam &opt,
            double clip) {
  zero_grads(params);
  t.backward(loss);
  clip_grad_norm(params, clip);
  opt.step(params);
}

} // namespace

TrainOptions TrainOptions::from_config(const ExperimentConfig &c) {
  TrainOptions o;
  o.weights = {c.lambda_r, c.lambda_c};
  o.lr_g = c.lr_g;
  o.lr_d = c.lr_d;
  o.batch_size = c.batch_size;
  o.hint_ratio = c.hint_ratio;
  o.grad_clip = c.grad_clip;
  o.disc_weight_clip = c.disc_weight_clip;
  o.noise_sd = c.noise_sd;
  o.log_wall_time = c.log_wall_time;
  return o;
}

TrainState TrainState::init(const ModelConfig &model,
                            const TrainOptions &options, std::uint64_t seed) {
  TrainState s;
  s.rng.seed(seed);
  s.model = StingModel::init(model, s.rng);
  s.opt_g = Adam(options.lr_g);
  s.opt_d = Adam(options.lr_d);
  s.opt_g.prepare(s.model.generator_parameters());
  s.opt_d.prepare(s.model.discriminator_parameters());
  return s;
}

ModelConfig model_config_from(const ExperimentConfig &config,
                              Eigen::Index features) {
  ModelConfig m;
  m.features = features;
  m.hidden = config.hidden;
  m.disc_hidden = config.disc_hidden;
  m.heads = config.heads;
  m.attention = config.attention;
  m.backward = config.backward;
  return m;
}

Matrix sample_noise(Eigen::Index features, Eigen::Index columns, double sd,
                    Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(features, columns);
  for (Eigen::Index j = 0; j < columns; ++j)
    for (Eigen::Index i = 0; i < features; ++i)
      z(i, j) = sd * dist(rng);
  return z;
}

StepLosses pretrain_step(TrainState &state,
                         std::span<const TimeSeriesWindow> batch,
                         const TrainOptions &options) {
  if (batch.empty())
    throw std::invalid_argument("pretrain_step: empty batch");
  const BatchPair pair = pack_pair(batch);
  const SequenceBatch &fb = pair.forward;
  const Matrix z = sample_noise(fb.features, fb.steps * fb.batch,
                                options.noise_sd, state.rng);

  ad::Tape t;
  ad::GeneratorObjective o = ad::generator_terms(
      t, state.model, true, pair, t.constant(z), options.weights);
  StepLosses s = generator_losses(t, o, state.step);
  state.opt_g.set_learning_rate(options.lr_g);
  update(t, mean_over_batch(t, o.total), state.model.generator_parameters(),
         state.opt_g, options.grad_clip);
  ++state.g_updates;
  ++state.step;
  state.history.push_back(s);
  return s;
}

StepLosses train_step(TrainState &state,
                      std::span<const TimeSeriesWindow> batch,
                      const TrainOptions &options) {
  if (batch.empty())
    throw std::invalid_argument("train_step: empty batch");
  const BatchPair pair = pack_pair(batch);
  const SequenceBatch &fb = pair.forward;
  const Matrix z = sample_noise(fb.features, fb.steps * fb.batch,
                                options.noise_sd, state.rng);
  const Matrix hint = sample_hint(fb.mask, options.hint_ratio, state.rng);
  StingModel &model = state.model;

  // The generator pass is shared: its values feed the D update, and the
  // adversarial terms are attached afterwards with the updated D.
  ad::Tape gt;
  ad::GeneratorObjective o = ad::generator_terms(
      gt, model, true, pair, gt.constant(z), options.weights);

  double disc = 0.0;
  {
    const Matrix x_fwd = gt.value(o.forward.x_hat_refined);
    Matrix x_bwd;
    if (model.config.backward)
      x_bwd = gt.value(o.backward.x_hat_refined);
    ad::Tape dt;
    const ad::Var ld = ad::discriminator_objective(
        dt, model, true, pair, x_fwd, model.config.backward ? &x_bwd : nullptr,
        hint);
    const ad::Var loss = mean_over_batch(dt, ld);
    disc = dt.value(loss)(0, 0);
    check_finite(disc, "L_D", state.step);
    state.opt_d.set_learning_rate(options.lr_d);
    update(dt, loss, model.discriminator_parameters(), state.opt_d,
           options.grad_clip);
    if (options.disc_weight_clip > 0.0)
      for (Parameter *p : model.discriminator_parameters())
        p->value = p->value.cwiseMax(-options.disc_weight_clip)
                       .cwiseMin(options.disc_weight_clip);
    ++state.d_updates;
  }

  ad::add_adversarial(gt, model, pair, hint, o);
  StepLosses s = generator_losses(gt, o, state.step);
  s.adversarial = true;
  s.disc = disc;
  state.opt_g.set_learning_rate(options.lr_g);
  update(gt, mean_over_batch(gt, o.total), model.generator_parameters(),
         state.opt_g, options.grad_clip);
  ++state.g_updates;
  ++state.step;
  state.history.push_back(s);
  return s;
}

EpochMetrics run_epoch(TrainState &state,
                       std::span<const TimeSeriesWindow> data,
                       const TrainOptions &options, bool adversarial) {
  if (data.empty())
    throw std::invalid_argument("training: empty dataset");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.rng);

  const std::size_t bs = static_cast<std::size_t>(options.batch_size);
  StepLosses sum;
  long steps = 0;
  std::vector<TimeSeriesWindow> batch;
  for (std::size_t i = 0; i < order.size(); i += bs) {
    batch.clear();
    for (std::size_t j = i; j < std::min(order.size(), i + bs); ++j)
      batch.push_back(data[order[j]]);
    const StepLosses s = adversarial ? train_step(state, batch, options)
                                     : pretrain_step(state, batch, options);
    sum.recon_fwd += s.recon_fwd;
    sum.recon_bwd += s.recon_bwd;
    sum.consistency += s.consistency;
    sum.adv_fwd += s.adv_fwd;
    sum.adv_bwd += s.adv_bwd;
    sum.gen_total += s.gen_total;
    sum.disc += s.disc;
    ++steps;
  }
  EpochMetrics m;
  m.epoch = state.epoch;
  m.adversarial = adversarial;
  m.mean = sum;
  m.mean.adversarial = adversarial;
  const double n = static_cast<double>(steps);
  m.mean.recon_fwd /= n;
  m.mean.recon_bwd /= n;
  m.mean.consistency /= n;
  m.mean.adv_fwd /= n;
  m.mean.adv_bwd /= n;
  m.mean.gen_total /= n;
  m.mean.disc /= n;
  ++state.epoch;
  m.step = state.step;
  if (options.log_wall_time)
    m.wall_time = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  state.epochs.push_back(m);
  return m;
}

void pretrain_generators(TrainState &state,
                         std::span<const TimeSeriesWindow> data, long epochs,
                         const TrainOptions &options) {
  if (epochs < 0)
    throw std::invalid_argument("pretrain_generators: epochs must be >= 0");
  if (data.empty())
    throw std::invalid_argument("training: empty dataset");
  for (long e = 0; e < epochs; ++e)
    run_epoch(state, data, options, false);
}

void fit(TrainState &state, const ExperimentConfig &config,
         std::span<const TimeSeriesWindow> data, const EpochCallback &on_epoch) {
  if (data.empty())
    throw std::invalid_argument("training: empty dataset");
  const TrainOptions options = TrainOptions::from_config(config);
  const long total = config.pretrain_epochs + config.adversarial_epochs;
  while (state.epoch < total) {
    run_epoch(state, data, options, state.epoch >= config.pretrain_epochs);
    if (on_epoch)
      on_epoch(state);
  }
}

TrainState fit(const ExperimentConfig &config,
               std::span<const TimeSeriesWindow> data,
               const EpochCallback &on_epoch) {
  if (data.empty())
    throw std::invalid_argument("training: empty dataset");
  TrainState state = TrainState::init(
      model_config_from(config, data.front().features()),
      TrainOptions::from_config(config), config.seed);
  fit(state, config, data, on_epoch);
  return state;
}

std::string metrics_line(const EpochMetrics &m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["step"] = m.step;
  j["phase"] = m.adversarial ? "adversarial" : "pretrain";
  j["L_R_fwd"] = m.mean.recon_fwd;
  j["L_R_bwd"] = m.mean.recon_bwd;
  j["L_C"] = m.mean.consistency;
  j["L_W_fwd"] = m.mean.adv_fwd;
  j["L_W_bwd"] = m.mean.adv_bwd;
  j["L_G"] = m.mean.gen_total;
  j["L_D"] = m.mean.disc;
  j["wall_time"] = m.wall_time;
  return j.dump();
}

void write_metrics_log(const std::string &path,
                       const std::vector<EpochMetrics> &epochs) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write metrics log '" + path + "'");
  for (const EpochMetrics &m : epochs)
    out << metrics_line(m) << '\n';
}

} // namespace sting
