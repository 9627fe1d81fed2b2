// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "sting/evaluation.hpp"
#include "test_support.hpp"
#include "toy.hpp"

using namespace sting;
using namespace sting::testing;

namespace {

TimeSeriesWindow column_window(std::vector<double> values) {
  Matrix v(static_cast<Eigen::Index>(values.size()), 1);
  std::vector<double> ts;
  for (std::size_t i = 0; i < values.size(); ++i) {
    v(static_cast<Eigen::Index>(i), 0) = values[i];
    ts.push_back(static_cast<double>(i));
  }
  return make_window(v, ts);
}

const double kGap = std::nan("");

} // namespace

TEST(Rmse, HandValues) {
  EvalTargets targets;
  targets.cells.push_back({0, 0, 0.5});
  Matrix imputed = Matrix::Constant(2, 2, 7.0);
  imputed(0, 0) = 0.3;
  EXPECT_NEAR(rmse_heldout(imputed, targets), 0.2, 1e-15);
  imputed(0, 0) = 0.5;
  EXPECT_EQ(rmse_heldout(imputed, targets), 0.0);
  EXPECT_THROW(rmse_heldout(imputed, EvalTargets{}), std::invalid_argument);
}

TEST(Rmse, MatchesBruteForceAndIgnoresOtherCells) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix imputed = random_matrix(6, 3, rng);
    EvalTargets targets;
    double sq = 0.0;
    const int n = 1 + trial % 10;
    for (int i = 0; i < n; ++i) {
      const HeldOutCell c{static_cast<Eigen::Index>(rng() % 6),
                          static_cast<Eigen::Index>(rng() % 3),
                          std::uniform_real_distribution<double>(0, 1)(rng)};
      targets.cells.push_back(c);
      sq += (imputed(c.step, c.feature) - c.value) *
            (imputed(c.step, c.feature) - c.value);
    }
    EXPECT_NEAR(rmse_heldout(imputed, targets), std::sqrt(sq / n), 1e-12);
    Matrix other = random_matrix(6, 3, rng);
    for (const HeldOutCell &c : targets.cells)
      other(c.step, c.feature) = imputed(c.step, c.feature);
    EXPECT_EQ(rmse_heldout(other, targets), rmse_heldout(imputed, targets));
  }
}

TEST(Baselines, PrevCarriesForward) {
  const TimeSeriesWindow w = column_window({1, kGap, kGap, 4});
  const Matrix out = baseline_prev(w, Vector::Constant(1, 9.0));
  EXPECT_EQ(out(0, 0), 1);
  EXPECT_EQ(out(1, 0), 1);
  EXPECT_EQ(out(2, 0), 1);
  EXPECT_EQ(out(3, 0), 4);
  const Matrix lead = baseline_prev(column_window({kGap, 2, kGap}),
                                    Vector::Constant(1, 9.0));
  EXPECT_EQ(lead(0, 0), 9.0);
  EXPECT_EQ(lead(2, 0), 2.0);
}

TEST(Baselines, PrevIsIdempotent) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const TimeSeriesWindow w = random_window(8, 3, 0.5, rng);
    const Vector means = random_matrix(3, 1, rng).col(0);
    const Matrix once = baseline_prev(w, means);
    std::vector<double> ts(8);
    for (int i = 0; i < 8; ++i)
      ts[i] = i;
    const Matrix twice = baseline_prev(make_window(once, ts), means);
    ASSERT_TRUE(once == twice);
  }
}

TEST(Baselines, MeanUsesObservedTrainingValues) {
  const TimeSeriesWindow a = column_window({2, kGap});
  const TimeSeriesWindow b = column_window({kGap, 4});
  const TimeSeriesWindow ws[] = {a, b};
  const Vector means = feature_means(ws);
  EXPECT_EQ(means(0), 3.0);
  EXPECT_EQ(baseline_mean(a, means)(1, 0), 3.0);
  EXPECT_EQ(baseline_mean(a, means)(0, 0), 2.0);
}

TEST(Baselines, KnnPrefersDuplicate) {
  Matrix base(3, 2);
  base << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const std::vector<double> ts = {0, 1, 2};
  Matrix query = base;
  query(1, 1) = kGap;
  Matrix far = base.array() + 0.3;
  Matrix farther = base.array() - 0.4;
  const std::vector<TimeSeriesWindow> ws = {
      make_window(query, ts), make_window(far, ts), make_window(base, ts),
      make_window(farther, ts)};
  const auto out = baseline_knn(ws, 1, Vector::Zero(2));
  EXPECT_EQ(out[0](1, 1), 0.4);
  EXPECT_EQ(out[0](0, 0), 0.1);
  const auto two = baseline_knn(ws, 2, Vector::Zero(2));
  EXPECT_NEAR(two[0](1, 1), 0.5 * (0.4 + 0.7), 1e-15);
  EXPECT_THROW(baseline_knn(ws, 0, Vector::Zero(2)), std::invalid_argument);
}

TEST(Corruption, OnlyRemovesObservedCells) {
  Rng rng(3);
  std::vector<TimeSeriesWindow> ws;
  for (int i = 0; i < 50; ++i)
    ws.push_back(random_window(10, 3, 0.7, rng));
  const auto out = corrupt_windows(ws, 0.5, 11);
  double before = 0, after = 0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    before += ws[i].mask.sum();
    after += out[i].mask.sum();
    for (Eigen::Index c = 0; c < ws[i].mask.size(); ++c)
      if (ws[i].mask.data()[c] == 0.0)
        ASSERT_EQ(out[i].mask.data()[c], 0.0);
    ASSERT_TRUE(out[i].delta == build_delta(out[i].timestamps, out[i].mask));
  }
  EXPECT_NEAR(after / before, 0.5, 0.05);
  EXPECT_TRUE(corrupt_windows(ws, 0.0, 1)[3].mask == ws[3].mask);
}

TEST(Tables, CsvAndText) {
  Table t;
  t.columns = {"imputer", "rmse"};
  t.rows = {{"Mean", "0.25"}, {"STING", "0.125"}};
  EXPECT_EQ(t.to_csv(), "imputer,rmse\nMean,0.25\nSTING,0.125\n");
  const std::string text = t.to_text();
  EXPECT_NE(text.find("STING    0.125"), std::string::npos) << text;
  EXPECT_EQ(format_number(1.0 / 3.0, 3), "0.333");
}

TEST(Split, PartitionsAllWindows) {
  Rng rng(4);
  std::vector<TimeSeriesWindow> ws;
  for (int i = 0; i < 10; ++i)
    ws.push_back(random_window(3, 2, 1.0, rng));
  const DownstreamSplit s = split_dataset(ws, 0.8, 5);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_THROW(split_dataset(ws, 1.0, 5), std::invalid_argument);
}

TEST(Downstream, RatioZeroEqualsIdealAndShape) {
  const ExperimentConfig c = toy_config(1, 40);
  const Dataset data = load_dataset(c);
  const DownstreamSplit split = split_dataset(data.windows, 0.8, 3);
  const std::vector<TimeSeriesWindow> train_in =
      corrupt_windows(drop_feature(split.train, 4), 0.2, 7);
  std::vector<NamedImputer> imputers =
      baseline_imputers(feature_means(train_in), 3);
  DownstreamOptions opt;
  opt.ratios = {0.0, 0.5};
  opt.regressor.hidden = 8;
  opt.regressor.epochs = 2;
  opt.seed = 9;
  const DownstreamTable t = downstream_eval(split, imputers, opt);
  ASSERT_EQ(t.rmse.rows(), 4);
  ASSERT_EQ(t.rmse.cols(), 2);
  EXPECT_EQ(t.rows.back(), "Ideal");
  for (Eigen::Index i = 0; i < 3; ++i)
    EXPECT_EQ(t.rmse(i, 0), t.rmse(3, 0)) << t.rows[static_cast<std::size_t>(i)];
  EXPECT_EQ(t.rmse(3, 0), t.rmse(3, 1));
  EXPECT_EQ(downstream_table(t).rows.size(), 4u);

  opt.corrupted = {4};
  EXPECT_THROW(downstream_eval(split, imputers, opt), std::invalid_argument);
  opt.corrupted = {};
  DownstreamSplit gappy = split;
  gappy.test[0].mask(0, 0) = 0.0;
  EXPECT_THROW(downstream_eval(gappy, imputers, opt), std::invalid_argument);
}

TEST(Ablation, FourRowsAndSharedHash) {
  ExperimentConfig c = toy_config(2, 32);
  c.pretrain_epochs = 1;
  c.adversarial_epochs = 1;
  const auto windows = holdout_windows(load_dataset(c), c);
  const auto rows = run_ablation(c, windows);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].variant, "full");
  EXPECT_EQ(rows[0].increase_pct, 0.0);
  EXPECT_EQ(rows[2].variant, "no_search");
  EXPECT_EQ(rows[2].checkpoint_hash, rows[0].checkpoint_hash);
  EXPECT_NE(rows[1].checkpoint_hash, rows[0].checkpoint_hash);
  EXPECT_NE(rows[3].checkpoint_hash, rows[0].checkpoint_hash);
  const Table t = ablation_table(rows);
  EXPECT_EQ(t.columns[1], "rmse");
  EXPECT_EQ(t.columns[2], "increase_pct");

  c.ablation_variants = {"full", "bogus"};
  EXPECT_THROW(run_ablation(c, windows), std::invalid_argument);
}

TEST(Scoring, EveryImputerGetsARow) {
  const ExperimentConfig c = toy_config(3, 24);
  const auto windows = holdout_windows(load_dataset(c), c);
  const auto rows =
      score_imputers(windows, baseline_imputers(feature_means(windows), 3));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].name, "Mean");
  EXPECT_EQ(rows[1].name, "Prev");
  EXPECT_EQ(rows[2].name, "KNN");
  for (const ScoreRow &r : rows)
    EXPECT_GT(r.rmse, 0.0);
}
