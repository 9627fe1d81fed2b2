// SPDX-License-Identifier: Apache-2.0
#include "sting/model.hpp"

#include <cstring>

namespace sting {

StingModel StingModel::init(const ModelConfig &config, Rng &rng) {
  StingModel m;
  m.config = config;
  const GeneratorShape shape{config.features, config.hidden, config.heads,
                             config.attention};
  m.forward = GeneratorParams::init("gen_fwd", shape, rng);
  if (config.backward)
    m.backward = GeneratorParams::init("gen_bwd", shape, rng);
  m.discriminator = DiscriminatorParams::init("disc", config.features,
                                              config.disc_hidden, rng);
  return m;
}

ParameterList StingModel::generator_parameters() {
  ParameterList out = forward.parameters();
  if (config.backward)
    for (Parameter *p : backward.parameters())
      out.push_back(p);
  return out;
}

ParameterList StingModel::discriminator_parameters() {
  return discriminator.parameters();
}

ParameterList StingModel::all_parameters() {
  ParameterList out = generator_parameters();
  for (Parameter *p : discriminator_parameters())
    out.push_back(p);
  return out;
}

std::uint64_t parameter_hash(StingModel &model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void *data, std::size_t n) {
    const auto *bytes = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Parameter *p : model.all_parameters()) {
    feed(p->name.data(), p->name.size());
    const std::int64_t dims[2] = {p->value.rows(), p->value.cols()};
    feed(dims, sizeof(dims));
    feed(p->value.data(), sizeof(double) * p->value.size());
  }
  return h;
}

namespace ad {

GeneratorObjective generator_terms(Tape &t, const StingModel &model,
                                   bool track_generators, const BatchPair &pair,
                                   Var noise, const LossWeights &weights) {
  const SequenceBatch &fb = pair.forward;
  const Eigen::Index B = fb.batch;
  GeneratorObjective o;
  o.forward = generate(t, model.forward, track_generators, pair, noise,
                       Direction::forward);
  o.recon_fwd = masked_mse(t, o.forward.x_hat_raw, fb.x_bar, fb.mask, B);
  Var recon = o.recon_fwd;
  if (model.config.backward) {
    o.backward = generate(t, model.backward, track_generators, pair, noise,
                          Direction::backward);
    o.recon_bwd = masked_mse(t, o.backward.x_hat_raw, fb.x_bar, fb.mask, B);
    o.consistency =
        mean_abs_diff(t, o.forward.x_hat_raw, o.backward.x_hat_raw, B);
    recon = add(t, recon, o.recon_bwd);
  }
  Var total = scale(t, recon, weights.recon);
  if (o.consistency.valid())
    total = add(t, total, scale(t, o.consistency, weights.consistency));
  o.total = total;
  return o;
}

void add_adversarial(Tape &t, const StingModel &model, const BatchPair &pair,
                     const Matrix &hint, GeneratorObjective &o) {
  const SequenceBatch &fb = pair.forward;
  const Matrix missing = (1.0 - fb.mask.array()).matrix();
  auto adversarial = [&](Var refined) {
    const Var p = run_discriminator(t, model.discriminator, false, refined,
                                    hint, fb.steps, fb.batch);
    return scale(t, weighted_mean(t, p, missing, fb.batch), -1.0);
  };
  o.adv_fwd = adversarial(o.forward.x_hat_refined);
  o.total = add(t, o.total, o.adv_fwd);
  if (model.config.backward) {
    o.adv_bwd = adversarial(o.backward.x_hat_refined);
    o.total = add(t, o.total, o.adv_bwd);
  }
}

GeneratorObjective generator_objective(Tape &t, const StingModel &model,
                                       bool track_generators,
                                       const BatchPair &pair, Var noise,
                                       const Matrix *hint,
                                       const LossWeights &weights) {
  GeneratorObjective o =
      generator_terms(t, model, track_generators, pair, noise, weights);
  if (hint != nullptr)
    add_adversarial(t, model, pair, *hint, o);
  return o;
}

Var discriminator_objective(Tape &t, const StingModel &model, bool track,
                            const BatchPair &pair, const Matrix &x_fwd,
                            const Matrix *x_bwd, const Matrix &hint) {
  const SequenceBatch &fb = pair.forward;
  auto one = [&](const Matrix &x) {
    const Var p = run_discriminator(t, model.discriminator, track,
                                    t.constant(x), hint, fb.steps, fb.batch);
    return discriminator_loss(t, p, fb.mask, fb.batch);
  };
  Var loss = one(x_fwd);
  if (x_bwd != nullptr)
    loss = scale(t, add(t, loss, one(*x_bwd)), 0.5);
  return loss;
}

} // namespace ad
} // namespace sting
