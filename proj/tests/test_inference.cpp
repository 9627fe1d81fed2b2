// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "sting/inference.hpp"
#include "sting/training.hpp"
#include "test_support.hpp"

using namespace sting;
using namespace sting::testing;

namespace {

// L(z) = ||z_b||^2 per block b.
RowVector quadratic(const Matrix &z, Matrix *grad, Eigen::Index batch) {
  if (grad)
    *grad = 2.0 * z;
  RowVector out = RowVector::Zero(batch);
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    out(c % batch) += z.col(c).squaredNorm();
  return out;
}

StingModel small_model(Eigen::Index D, Rng &rng, bool backward = true) {
  ModelConfig mc;
  mc.features = D;
  mc.hidden = 6;
  mc.disc_hidden = 5;
  mc.heads = 2;
  mc.backward = backward;
  return StingModel::init(mc, rng);
}

} // namespace

TEST(Search, QuadraticStubOneStep) {
  Rng rng(1);
  const Matrix z = random_matrix(3, 8, rng);
  const double eta = 0.1;
  const SearchResult r = gradient_descent_search(
      z, 2, [](const Matrix &x, Matrix *g) { return quadratic(x, g, 2); }, 1,
      eta);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LE(((1 - 2 * eta) * z - r.z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Search, ZeroIterationsOrStepReturnInit) {
  Rng rng(2);
  const Matrix z = random_matrix(2, 6, rng);
  auto f = [](const Matrix &x, Matrix *g) { return quadratic(x, g, 3); };
  EXPECT_TRUE(gradient_descent_search(z, 3, f, 0, 0.1).z == z);
  EXPECT_TRUE(gradient_descent_search(z, 3, f, 10, 0.0).z == z);
  EXPECT_THROW(gradient_descent_search(z, 4, f, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(gradient_descent_search(z, 3, f, -1, 0.1), std::invalid_argument);
}

TEST(Search, KeepsBestIterate) {
  // Step 1.5 on ||z||^2 overshoots: z -> -2z, so the start stays best.
  Rng rng(3);
  const Matrix z = random_matrix(2, 4, rng);
  const SearchResult r = gradient_descent_search(
      z, 1, [](const Matrix &x, Matrix *g) { return quadratic(x, g, 1); }, 5,
      1.5);
  EXPECT_TRUE(r.z == z);
  EXPECT_EQ(r.best_loss(0), r.initial_loss(0));
}

TEST(Search, NonFiniteStopsWithWarning) {
  int calls = 0;
  auto f = [&calls](const Matrix &x, Matrix *g) {
    ++calls;
    if (g)
      *g = calls >= 2 ? Matrix::Constant(x.rows(), x.cols(), std::nan(""))
                      : Matrix::Ones(x.rows(), x.cols());
    return RowVector::Constant(1, -static_cast<double>(calls));
  };
  const Matrix z = Matrix::Zero(1, 2);
  const SearchResult r = gradient_descent_search(z, 1, f, 10, 0.5);
  EXPECT_TRUE(r.non_finite);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.z.isConstant(-0.5));
  EXPECT_TRUE(r.z.allFinite());
}

TEST(Search, NeverWorsensModelObjective) {
  Rng rng(4);
  const StingModel model = small_model(3, rng);
  std::vector<TimeSeriesWindow> windows;
  for (int i = 0; i < 6; ++i)
    windows.push_back(random_window(8, 3, 0.6, rng));
  const Matrix z0 = sample_noise(3, 8 * 6, 0.01, rng);
  const SearchResult r = search_noise(model, windows, z0, 20, 0.05, LossWeights{});
  for (Eigen::Index b = 0; b < 6; ++b)
    EXPECT_LE(r.best_loss(b), r.initial_loss(b));
  // Re-evaluating the returned noise reproduces the reported loss.
  const BatchPair pair = pack_pair(windows);
  const RowVector again = noise_objective(model, pair, LossWeights{})(r.z, nullptr);
  EXPECT_TRUE(again.isApprox(r.best_loss, 1e-12));
}

TEST(Search, BatchedEqualsPerWindow) {
  Rng rng(5);
  const StingModel model = small_model(2, rng);
  std::vector<TimeSeriesWindow> windows;
  for (int i = 0; i < 3; ++i)
    windows.push_back(random_window(6, 2, 0.5, rng));
  const Matrix z0 = sample_noise(2, 6 * 3, 0.01, rng);
  const SearchResult all = search_noise(model, windows, z0, 5, 0.05, LossWeights{});
  for (Eigen::Index b = 0; b < 3; ++b) {
    Matrix zb(2, 6);
    for (Eigen::Index t = 0; t < 6; ++t)
      zb.col(t) = z0.col(t * 3 + b);
    const TimeSeriesWindow one[] = {windows[static_cast<std::size_t>(b)]};
    const SearchResult single = search_noise(model, one, zb, 5, 0.05, LossWeights{});
    for (Eigen::Index t = 0; t < 6; ++t)
      EXPECT_TRUE(single.z.col(t).isApprox(all.z.col(t * 3 + b), 1e-12));
    EXPECT_NEAR(single.best_loss(0), all.best_loss(b), 1e-12);
  }
}

TEST(Average, MeanAtMissingObservedElsewhere) {
  Matrix x_bar(1, 2), mask(1, 2);
  x_bar << 0.25, 0.0;
  mask << 1, 0;
  Matrix fwd(1, 2), bwd(1, 2);
  fwd << 0.25, 0.0;
  bwd << 0.25, 2.0;
  const Matrix out = average_directions(fwd, bwd, x_bar, mask);
  EXPECT_EQ(out(0, 0), 0.25);
  EXPECT_EQ(out(0, 1), 1.0);
  EXPECT_TRUE(average_directions(bwd, bwd, x_bar, mask) == bwd);
}

TEST(Impute, RefinementAndProvenance) {
  Rng rng(6);
  const StingModel model = small_model(3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const TimeSeriesWindow w = random_window(7, 3, 0.5, rng);
    const ImputationResult r =
        impute(w, model.forward, &model.backward, random_matrix(7, 3, rng));
    ASSERT_TRUE(r.values.allFinite());
    for (Eigen::Index i = 0; i < w.x_bar.size(); ++i) {
      if (w.mask.data()[i] != 0.0) {
        ASSERT_EQ(r.values.data()[i], w.x_bar.data()[i]);
        ASSERT_EQ(r.provenance.data()[i], 0.0);
      } else {
        ASSERT_EQ(r.provenance.data()[i], 1.0);
        ASSERT_EQ(r.values.data()[i],
                  0.5 * (r.forward.data()[i] + r.backward.data()[i]));
      }
      const double v = r.values.data()[i];
      ASSERT_EQ(r.out_of_range.data()[i], (v < 0.0 || v > 1.0) ? 1.0 : 0.0);
    }
  }
}

TEST(Impute, ForwardOnlyUsesForwardOutput) {
  Rng rng(7);
  const StingModel model = small_model(2, rng, false);
  const TimeSeriesWindow w = random_window(5, 2, 0.5, rng);
  const Matrix z = random_matrix(5, 2, rng);
  const ImputationResult r = impute(w, model.forward, nullptr, z);
  EXPECT_TRUE(r.values == r.forward);
  EXPECT_TRUE(r.values ==
              generate_sequence(w, z, model.forward, Direction::forward)
                  .x_hat_refined);
}

TEST(Impute, BatchMatchesSingleWindow) {
  Rng rng(8);
  const StingModel model = small_model(3, rng);
  std::vector<TimeSeriesWindow> windows;
  for (int i = 0; i < 4; ++i)
    windows.push_back(random_window(6, 3, 0.5, rng));
  const Matrix z = random_matrix(3, 6 * 4, rng);
  const auto batch = impute_batch(model, windows, z);
  const auto zs = unpack_sequences(z, 6, 4);
  for (std::size_t b = 0; b < 4; ++b) {
    const ImputationResult one =
        impute(windows[b], model.forward, &model.backward, zs[b]);
    EXPECT_TRUE(batch[b].values.isApprox(one.values, 1e-12));
  }
}

TEST(ImputeWindows, ReportsLossesAndIsSeeded) {
  Rng rng(9);
  const StingModel model = small_model(2, rng);
  std::vector<TimeSeriesWindow> windows;
  for (int i = 0; i < 5; ++i)
    windows.push_back(random_window(6, 2, 0.5, rng));
  InferenceOptions opt;
  opt.iterations = 4;
  opt.batch_size = 2;
  Rng a(3), b(3);
  const InferenceReport ra = impute_windows(model, windows, opt, a);
  const InferenceReport rb = impute_windows(model, windows, opt, b);
  ASSERT_EQ(ra.results.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_LE(ra.loss_final[i], ra.loss_initial[i]);
    EXPECT_TRUE(ra.results[i].values == rb.results[i].values);
  }
  opt.search = false;
  Rng c(3);
  const InferenceReport rc = impute_windows(model, windows, opt, c);
  EXPECT_TRUE(std::isnan(rc.loss_final[0]));
}

TEST(ImputeSeries, PassesObservedCellsThroughInOriginalUnits) {
  Rng rng(10);
  const StingModel model = small_model(2, rng);
  RawSeries raw;
  raw.feature_names = {"a", "b"};
  raw.values = random_matrix(11, 2, rng, 100.0, 300.0);
  for (int i = 0; i < 11; ++i)
    raw.timestamps.push_back(i * 2.0);
  raw.values(3, 0) = std::nan("");
  raw.values(10, 1) = std::nan("");
  const NormalizationStats norm = fit_normalization(raw);
  InferenceOptions opt;
  opt.iterations = 2;
  const SeriesImputation out = impute_series(model, norm, raw, 4, opt, rng);
  ASSERT_EQ(out.imputed.values.rows(), 11);
  EXPECT_EQ(out.imputed.timestamps, raw.timestamps);
  EXPECT_EQ(out.provenance.sum(), 2.0);
  EXPECT_EQ(out.provenance(3, 0), 1.0);
  EXPECT_EQ(out.provenance(10, 1), 1.0);
  for (Eigen::Index i = 0; i < raw.values.size(); ++i)
    if (!std::isnan(raw.values.data()[i]))
      EXPECT_EQ(out.imputed.values.data()[i], raw.values.data()[i]);
  EXPECT_TRUE(out.imputed.values.allFinite());
}
