// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "gradient_cases.hpp"
#include "sting/generator.hpp"

using namespace sting;
using namespace sting::testing;

TEST(Gradients, MatchCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const GradientCase &c : gradient_cases(seed))
      EXPECT_LT(c.error, 1e-4) << c.name << " seed " << seed;
  }
}

TEST(Gradients, ElementwiseAndShapeOps) {
  Rng rng(4);
  const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
  const Matrix mask = random_mask(3, 4, 0.5, rng);
  // Random output weights so every entry's gradient differs.
  auto check = [&](const LossBuilder &f) {
    return gradient_check({a, b}, [&](ad::Tape &t, const std::vector<ad::Var> &v) {
      const ad::Var y = f(t, v);
      Rng r(99);
      return ad::sum(t, ad::mul_const(t, y,
                                      random_matrix(t.value(y).rows(),
                                                    t.value(y).cols(), r)));
    });
  };
  EXPECT_LT(check([](ad::Tape &t, const std::vector<ad::Var> &v) {
              return ad::mul(t, ad::sigmoid(t, v[0]), ad::tanh(t, v[1]));
            }),
            1e-6);
  EXPECT_LT(check([](ad::Tape &t, const std::vector<ad::Var> &v) {
              return ad::sub(t, ad::exp(t, v[0]), ad::scale(t, v[1], 3.0));
            }),
            1e-6);
  EXPECT_LT(check([&](ad::Tape &t, const std::vector<ad::Var> &v) {
              return ad::blend(t, mask, v[0], v[1]);
            }),
            1e-6);
  EXPECT_LT(check([](ad::Tape &t, const std::vector<ad::Var> &v) {
              return ad::concat_rows(
                  t, {ad::slice_cols(t, v[0], 1, 2),
                      ad::slice_cols(t, ad::reverse_time(t, v[1], 2, 2), 0, 2)});
            }),
            1e-6);
  EXPECT_LT(check([](ad::Tape &t, const std::vector<ad::Var> &v) {
              return ad::concat_cols(t, {ad::add(t, v[0], v[1]), v[0]});
            }),
            1e-6);
}

TEST(Gradients, MatmulAffine) {
  Rng rng(5);
  EXPECT_LT(gradient_check({random_matrix(2, 3, rng), random_matrix(3, 4, rng),
                            random_matrix(2, 1, rng)},
                           [](ad::Tape &t, const std::vector<ad::Var> &v) {
                             return ad::tanh(t, ad::affine(t, v[0], v[1], v[2]));
                           }),
            1e-6);
}

// The estimate x̂_t feeds step t+1 where that cell is missing, so the loss
// on later observed cells reaches it and, through the context, the noise at
// missing cells. The last step's estimate feeds nothing.
TEST(Gradients, DelayedGradientReachesMissingEstimates) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index T = 5, D = 3;
    TimeSeriesWindow w = random_window(T, D, 1.0, rng);
    const Eigen::Index t_miss = 1 + trial % (T - 2);
    const Eigen::Index d_miss = trial % D;
    w.mask(t_miss, d_miss) = 0.0;
    w.x_bar(t_miss, d_miss) = 0.0;
    w.mask(T - 1, d_miss) = 0.0;
    w.x_bar(T - 1, d_miss) = 0.0;
    w.delta = build_delta(w.timestamps, w.mask);

    GeneratorShape shape;
    shape.features = D;
    shape.hidden = 4;
    shape.heads = 1;
    const GeneratorParams p = GeneratorParams::init("g", shape, rng);
    const TimeSeriesWindow one[] = {w};
    const BatchPair pair = pack_pair(one);
    ad::Tape t;
    const ad::Var z = t.variable(random_matrix(D, T, rng, 0.0, 1.0));
    const auto trace = ad::generate(t, p, false, pair, z, Direction::forward);
    t.backward(ad::sum(t, ad::masked_mse(t, trace.x_hat_raw,
                                         pair.forward.x_bar,
                                         pair.forward.mask, 1)));
    EXPECT_NE(t.grad(z)(d_miss, t_miss), 0.0) << "trial " << trial;
    EXPECT_NE(t.grad(trace.steps[t_miss - 1])(d_miss, 0), 0.0) << "trial " << trial;
    EXPECT_EQ(t.grad(trace.steps[T - 1])(d_miss, 0), 0.0) << "trial " << trial;
  }
}
