// SPDX-License-Identifier: Apache-2.0
/**
 * @file   gradient_cases.hpp
 * @brief  Seeded small instances whose tape gradients are compared with
 *         central finite differences.
 */
#pragma once

#include <string>
#include <vector>

#include "sting/inference.hpp"
#include "sting/model.hpp"
#include "test_support.hpp"

namespace sting::testing {

struct GradientCase {
  std::string name;
  double error = 0.0;
};

/// Decay weights with every pre-activation at least `margin` away from the
/// rectifier kink for the given δ block.
inline void keep_off_kink(Matrix &w, Matrix &b, const Matrix &delta, Rng &rng,
                          double margin = 0.05) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Matrix pre = (w * delta).colwise() + b.col(0);
    if (pre.cwiseAbs().minCoeff() > margin)
      return;
    b = random_matrix(b.rows(), 1, rng);
  }
}

inline std::vector<GradientCase> gradient_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradientCase> out;
  const Eigen::Index T = 4, D = 3, H = 4, B = 2;

  {
    const Eigen::Index nq = 3, nk = T, dk = 2;
    out.push_back(
        {"attention",
         gradient_check({random_matrix(dk, nq * B, rng, -2, 2),
                         random_matrix(dk, nk * B, rng, -2, 2),
                         random_matrix(D, nk * B, rng)},
                        [&](ad::Tape &t, const std::vector<ad::Var> &v) {
                          return ad::attention(t, v[0], v[1], v[2], nq, nk, B);
                        })});
  }
  {
    MultiHeadParams p = MultiHeadParams::init("mh", D, 2, rng);
    const Matrix x = random_matrix(D, T * B, rng);
    ParameterList params = p.parameters();
    out.push_back({"multi_head",
                   parameter_gradient_check(params, [&](ad::Tape &t) {
                     const auto w = ad::bind(t, p, true);
                     const ad::Var xv = t.constant(x);
                     return ad::multi_head(t, w, xv, xv, xv, T, T, B);
                   })});
  }
  {
    const Matrix delta = random_matrix(D, B, rng, 0.0, 3.0);
    Matrix w = random_matrix(H, D, rng), b = random_matrix(H, 1, rng);
    keep_off_kink(w, b, delta, rng);
    const Matrix h = random_matrix(H, B, rng);
    out.push_back({"decay",
                   gradient_check({w, b, delta},
                                  [&](ad::Tape &t, const std::vector<ad::Var> &v) {
                                    const ad::Var g = ad::decay(t, v[0], v[1], v[2]);
                                    return ad::mul(t, g, t.constant(h));
                                  })});
  }
  {
    GruCellParams p = GruCellParams::init("gru", D, H, rng);
    const Matrix x = random_matrix(D, B, rng), h = random_matrix(H, B, rng);
    ParameterList params = p.parameters();
    const double e_params = parameter_gradient_check(params, [&](ad::Tape &t) {
      return ad::gru_cell(t, t.constant(x), t.constant(h), ad::bind(t, p, true));
    });
    const double e_inputs =
        gradient_check({x, h}, [&](ad::Tape &t, const std::vector<ad::Var> &v) {
          return ad::gru_cell(t, v[0], v[1], ad::bind(t, p, false));
        });
    out.push_back({"gru", std::max(e_params, e_inputs)});
  }
  {
    const Matrix x = random_matrix(D, T * B, rng);
    const Matrix m = random_mask(D, T * B, 0.6, rng);
    out.push_back({"reconstruction",
                   gradient_check({random_matrix(D, T * B, rng)},
                                  [&](ad::Tape &t, const std::vector<ad::Var> &v) {
                                    return ad::masked_mse(t, v[0], x, m, B);
                                  })});
  }
  {
    const Matrix a = random_matrix(D, T * B, rng);
    Matrix b = a;
    std::bernoulli_distribution sign(0.5);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b.data()[i] += (sign(rng) ? 1 : -1) * (0.1 + std::abs(a.data()[i]));
    out.push_back({"consistency",
                   gradient_check({a, b},
                                  [&](ad::Tape &t, const std::vector<ad::Var> &v) {
                                    return ad::mean_abs_diff(t, v[0], v[1], B);
                                  })});
  }
  {
    const Matrix m = random_mask(D, T * B, 0.5, rng);
    out.push_back({"discriminator_loss",
                   gradient_check({random_matrix(D, T * B, rng, 0.0, 1.0)},
                                  [&](ad::Tape &t, const std::vector<ad::Var> &v) {
                                    return ad::discriminator_loss(t, v[0], m, B);
                                  })});
  }

  // Whole players on packed windows.
  std::vector<TimeSeriesWindow> windows;
  for (Eigen::Index b = 0; b < B; ++b)
    windows.push_back(random_window(T, D, 0.6, rng));
  const BatchPair pair = pack_pair(windows);
  ModelConfig mc;
  mc.features = D;
  mc.hidden = H;
  mc.disc_hidden = H;
  mc.heads = 2;
  StingModel model = StingModel::init(mc, rng);
  for (GeneratorParams *g : {&model.forward, &model.backward}) {
    g->decay.b.value = random_matrix(H, 1, rng);
    keep_off_kink(g->decay.w.value, g->decay.b.value, pair.forward.delta, rng);
    keep_off_kink(g->decay.w.value, g->decay.b.value, pair.backward.delta, rng);
  }
  const Matrix noise = random_matrix(D, T * B, rng, -0.1, 0.1);
  const Matrix hint = sample_hint(pair.forward.mask, 0.5, rng);
  const LossWeights weights;
  {
    const Matrix x_fwd = random_matrix(D, T * B, rng, 0.0, 1.0);
    const Matrix x_bwd = random_matrix(D, T * B, rng, 0.0, 1.0);
    ParameterList params = model.discriminator_parameters();
    out.push_back({"discriminator",
                   parameter_gradient_check(params, [&](ad::Tape &t) {
                     return ad::discriminator_objective(t, model, true, pair,
                                                        x_fwd, &x_bwd, hint);
                   })});
  }
  {
    ParameterList params = model.generator_parameters();
    out.push_back({"generator",
                   parameter_gradient_check(params, [&](ad::Tape &t) {
                     return ad::generator_objective(t, model, true, pair,
                                                    t.constant(noise), &hint,
                                                    weights)
                         .total;
                   })});
  }
  {
    const BatchObjective f = noise_objective(model, pair, weights);
    Matrix grad;
    f(noise, &grad);
    double worst = 0.0;
    Matrix probe = noise;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
      const double z0 = probe.data()[i];
      probe.data()[i] = z0 + h;
      const double up = f(probe, nullptr).sum();
      probe.data()[i] = z0 - h;
      const double down = f(probe, nullptr).sum();
      probe.data()[i] = z0;
      worst = std::max(worst,
                       relative_error(grad.data()[i], (up - down) / (2 * h)));
    }
    out.push_back({"noise", worst});
  }
  return out;
}

} // namespace sting::testing
