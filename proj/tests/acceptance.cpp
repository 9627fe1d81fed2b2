// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_cases.hpp"
#include "sting/discriminator.hpp"
#include "sting/experiment.hpp"
#include "test_support.hpp"

using namespace sting;
using namespace sting::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kHintLo = 0.09, kHintHi = 0.11;
constexpr double kMeanMargin = 0.8; // STING <= 0.8 x Mean
constexpr double kPrevSlack = 1.05; // STING <= 1.05 x Prev
constexpr double kStubTol = 1e-12;
constexpr double kSpotTol = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string &name, bool pass,
            const std::string &detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass)
    ++failures;
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("sting_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

/// Five-feature, 48-step sinusoid mixture with every other setting left at
/// its default.
ExperimentConfig sinusoid_config(std::uint64_t seed, long windows) {
  ExperimentConfig c;
  c.seed = seed;
  c.has_seed = true;
  c.synthetic_windows = windows;
  c.synthetic_steps = 48;
  c.synthetic_features = 5;
  c.window_length = 48;
  c.window_stride = 48;
  c.output_dir = scratch("run").string();
  return c;
}

/// Reduced model and budget for the harness criteria (7 to 10).
ExperimentConfig small_config(std::uint64_t seed) {
  ExperimentConfig c = sinusoid_config(seed, 400);
  c.hidden = 32;
  c.disc_hidden = 32;
  c.batch_size = 64;
  c.pretrain_epochs = 10;
  c.adversarial_epochs = 10;
  c.search_iterations = 20;
  return c;
}

void criterion_1() {
  const auto t0 = Clock::now();
  const std::vector<double> example_s = {0, 2, 3, 7};
  bool ok = build_delta(example_s, Matrix{{1}, {0}, {1}, {1}}) ==
            Matrix{{0}, {2}, {3}, {4}};
  const bool example = ok;
  int mismatches = 0;
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng() % 20);
    const Eigen::Index D = 1 + static_cast<Eigen::Index>(rng() % 5);
    const std::vector<double> s = random_timestamps(T, rng);
    const double p = std::uniform_real_distribution<double>(0, 1)(rng);
    const Matrix m = random_mask(T, D, p, rng);
    if (!(build_delta(s, m) == delta_oracle(s, m)))
      ++mismatches;
  }
  const double secs = seconds_since(t0);
  ok = ok && mismatches == 0 && secs < 10.0;
  report(1, "delta oracle", ok,
         fmt("example %s, %d/1000 mismatches, %.2fs (limit 10s)",
             example ? "ok" : "wrong", mismatches, secs));
}

void criterion_2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    for (const GradientCase &c : gradient_cases(seed))
      if (!(c.error <= worst)) {
        worst = c.error;
        worst_name = c.name;
      }
  const double secs = seconds_since(t0);
  report(2, "gradient check", worst < kGradTol && secs < 120.0,
         fmt("max relative error %.3g (%s, limit %.0e), %.2fs (limit 120s)",
             worst, worst_name.c_str(), kGradTol, secs));
}

void criterion_3() {
  Rng rng(303);
  int identity_fail = 0, bound_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng() % 12);
    const Eigen::Index D = 1 + static_cast<Eigen::Index>(rng() % 5);
    const Matrix m_hat = random_matrix(T, D, rng, 0.0, 1.0);
    const Matrix m = random_mask(T, D, 0.5, rng);
    // Zeroing m̂ on observed cells leaves only the first term.
    const Matrix fake_only = (m.array() != 0.0).select(0.0, m_hat);
    if (loss_discriminator(fake_only, m) != -loss_generator_adversarial(m_hat, m))
      ++identity_fail;
    const double l = loss_discriminator(m_hat, m);
    if (!(l >= -1.0 && l <= 1.0))
      ++bound_fail;
  }
  const double total = loss_generator_total(0.1, 0.2, -0.5, 10.0, 1.0);
  const bool spot = std::abs(total - 0.7) <= kSpotTol;
  report(3, "loss identities", identity_fail == 0 && bound_fail == 0 && spot,
         fmt("identity mismatches %d/1000, bound violations %d/1000, "
             "10*0.1+1*0.2-0.5 = %.15g",
             identity_fail, bound_fail, total));
}

void criterion_4() {
  Rng rng(404);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::Index D = 1 + static_cast<Eigen::Index>(rng() % 4);
    ModelConfig mc;
    mc.features = D;
    mc.hidden = 1 + static_cast<Eigen::Index>(rng() % 6);
    mc.disc_hidden = 3;
    mc.heads = 1 + static_cast<Eigen::Index>(rng() % 2);
    mc.attention = rng() % 4 != 0;
    mc.backward = rng() % 4 != 0;
    const StingModel model = StingModel::init(mc, rng);
    const double p = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    const TimeSeriesWindow w = random_window(T, D, p, rng);
    const ImputationResult r =
        impute(w, model.forward, mc.backward ? &model.backward : nullptr,
               random_matrix(T, D, rng, -1, 1));
    for (Eigen::Index k = 0; k < w.x_bar.size(); ++k)
      if (w.mask.data()[k] != 0.0 && r.values.data()[k] != w.x_bar.data()[k]) {
        ++bad;
        break;
      }
  }
  report(4, "refinement invariant", bad == 0,
         fmt("%d/1000 windows with a changed observed cell", bad));
}

void criterion_5() {
  Rng rng(505);
  const Matrix m = random_mask(1000, 100, 0.5, rng);
  const Matrix h = sample_hint(m, 0.1, rng);
  long revealed = 0;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (h.data()[i] != 0.5)
      ++revealed;
  const double frac = static_cast<double>(revealed) / static_cast<double>(h.size());
  const bool zero = (sample_hint(m, 0.0, rng).array() == 0.5).all();
  const bool one = sample_hint(m, 1.0, rng) == m;
  report(5, "hint statistics", frac >= kHintLo && frac <= kHintHi && zero && one,
         fmt("revealed %.4f at 0.1 over 1e5 cells (range [%.2f, %.2f]), "
             "ratio 0 all-0.5 %s, ratio 1 equals M %s",
             frac, kHintLo, kHintHi, zero ? "yes" : "no", one ? "yes" : "no"));
}

void criterion_6() {
  const auto t0 = Clock::now();
  std::vector<double> sting, mean, prev;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto ts = Clock::now();
    const ExperimentConfig c = sinusoid_config(seed, 2000);
    const Dataset data = load_dataset(c);
    const std::vector<TimeSeriesWindow> windows = holdout_windows(data, c);
    const TrainState state = fit(c, windows);
    const Vector means = feature_means(windows);
    std::vector<NamedImputer> imputers = {sting_imputer(
        state.model, inference_options_from(c),
        derive_seed(c.seed, SeedStream::inference))};
    for (NamedImputer &b : baseline_imputers(means, c.knn_k))
      if (b.name != "KNN")
        imputers.push_back(std::move(b));
    const std::vector<ScoreRow> rows = score_imputers(windows, imputers);
    sting.push_back(rows[0].rmse);
    mean.push_back(rows[1].rmse);
    prev.push_back(rows[2].rmse);
    std::printf("  seed %llu: STING %.6f Mean %.6f Prev %.6f (%.0fs)\n",
                static_cast<unsigned long long>(seed), rows[0].rmse,
                rows[1].rmse, rows[2].rmse, seconds_since(ts));
    std::fflush(stdout);
  }
  const double s = median(sting), m = median(mean), p = median(prev);
  const bool ok = s <= kMeanMargin * m && s <= kPrevSlack * p;
  report(6, "toy end-to-end", ok,
         fmt("median RMSE STING %.6f, Mean %.6f (need <= %.6f), Prev %.6f "
             "(need <= %.6f), %.1f min",
             s, m, kMeanMargin * m, p, kPrevSlack * p, seconds_since(t0) / 60.0));
}

// L(z) = ||z_b||^2 per block b.
RowVector quadratic(const Matrix &z, Matrix *grad, Eigen::Index batch) {
  if (grad)
    *grad = 2.0 * z;
  RowVector out = RowVector::Zero(batch);
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    out(c % batch) += z.col(c).squaredNorm();
  return out;
}

void criterion_7() {
  const ExperimentConfig c = small_config(7);
  const Dataset data = load_dataset(c);
  const std::vector<TimeSeriesWindow> windows = holdout_windows(data, c);
  const TrainState state = fit(c, windows);
  Rng rng(derive_seed(c.seed, SeedStream::inference));
  const InferenceReport r =
      impute_windows(state.model, windows, inference_options_from(c), rng);
  long worse = 0;
  double gain = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!(r.loss_final[i] <= r.loss_initial[i]))
      ++worse;
    gain += r.loss_initial[i] - r.loss_final[i];
  }

  Rng stub_rng(707);
  const Matrix z = random_matrix(4, 12, stub_rng);
  const double eta = 0.1;
  const SearchResult step = gradient_descent_search(
      z, 3, [](const Matrix &x, Matrix *g) { return quadratic(x, g, 3); }, 1, eta);
  const double stub_err = ((1 - 2 * eta) * z - step.z).cwiseAbs().maxCoeff();
  report(7, "noise search", worse == 0 && stub_err <= kStubTol,
         fmt("%ld/%zu windows worsened (mean L_G decrease %.3g), "
             "stub step error %.2g (limit %.0e)",
             worse, windows.size(), gain / static_cast<double>(windows.size()),
             stub_err, kStubTol));
}

void criterion_8() {
  const auto t0 = Clock::now();
  const ExperimentConfig c = small_config(8);
  const Dataset data = load_dataset(c);
  const std::vector<AblationRow> rows =
      run_ablation(c, holdout_windows(data, c));
  const std::vector<std::string> expected = {"full", "no_attention",
                                             "no_search", "no_backward"};
  bool shape = rows.size() == expected.size();
  for (std::size_t i = 0; shape && i < rows.size(); ++i)
    shape = rows[i].variant == expected[i] && std::isfinite(rows[i].rmse);
  bool shared = false;
  std::string directions;
  for (const AblationRow &r : rows) {
    if (r.variant == "no_search")
      shared = r.checkpoint_hash == rows.front().checkpoint_hash;
    directions += fmt(" %s %.4f (%+.1f%%)", r.variant.c_str(), r.rmse,
                      r.increase_pct);
  }
  std::printf("%s", ablation_table(rows).to_text().c_str());
  report(8, "ablation harness", shape && shared,
         fmt("%zu rows, no_search hash %s full;%s; %.0fs", rows.size(),
             shared ? "==" : "!=", directions.c_str(), seconds_since(t0)));
}

void criterion_9() {
  const auto t0 = Clock::now();
  bool ideal_exact = true;
  std::vector<double> sting, mean;
  for (std::uint64_t seed : {1, 2, 3}) {
    // The regressor needs enough data and epochs to depend on its inputs.
    ExperimentConfig c = small_config(900 + seed);
    c.synthetic_windows = 1000;
    c.adversarial_epochs = 30;
    c.downstream_epochs = 60;
    c.downstream_ratios = {0.0, 0.5};
    const DownstreamTable t = cmd_downstream(c);
    const Eigen::Index ideal = t.rmse.rows() - 1;
    for (Eigen::Index r = 0; r < ideal; ++r)
      ideal_exact = ideal_exact && t.rmse(r, 0) == t.rmse(ideal, 0);
    const auto row = [&](const std::string &name) {
      return static_cast<Eigen::Index>(
          std::find(t.rows.begin(), t.rows.end(), name) - t.rows.begin());
    };
    sting.push_back(t.rmse(row("STING"), 1));
    mean.push_back(t.rmse(row("Mean"), 1));
    std::printf("  seed %llu: ratio 0.5 STING %.6f Mean %.6f Ideal %.6f\n",
                static_cast<unsigned long long>(seed), sting.back(),
                mean.back(), t.rmse(ideal, 1));
    std::fflush(stdout);
  }
  const double s = median(sting), m = median(mean);
  report(9, "downstream protocol", ideal_exact && s <= m,
         fmt("ratio 0 rows equal Ideal %s; ratio 0.5 median STING %.6f vs "
             "Mean %.6f; %.0fs",
             ideal_exact ? "exactly" : "NOT", s, m, seconds_since(t0)));
}

void criterion_10() {
  ExperimentConfig c = small_config(10);
  c.synthetic_windows = 200;
  c.pretrain_epochs = 2;
  c.adversarial_epochs = 3;
  c.output_dir = scratch("determinism").string();
  cmd_train(c);
  const fs::path dir = c.output_dir;
  const std::string metrics = slurp(dir / "metrics.jsonl");
  const std::string ckpt = slurp(dir / "checkpoint.bin");
  fs::remove_all(dir);
  cmd_train(c);
  const bool same_metrics = !metrics.empty() && slurp(dir / "metrics.jsonl") == metrics;
  const bool same_ckpt = !ckpt.empty() && slurp(dir / "checkpoint.bin") == ckpt;
  report(10, "determinism", same_metrics && same_ckpt,
         fmt("metrics log %s (%zu bytes), checkpoint %s (%zu bytes)",
             same_metrics ? "identical" : "differs", metrics.size(),
             same_ckpt ? "identical" : "differs", ckpt.size()));
}

} // namespace

// Optional arguments select criteria by number; default runs all.
int main(int argc, char **argv) {
  const auto t0 = Clock::now();
  const std::vector<void (*)()> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
      criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int id = std::atoi(argv[a]);
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[a]);
      return 2;
    }
    selected[id - 1] = true;
  }
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i])
      continue;
    try {
      criteria[i]();
    } catch (const std::exception &e) {
      report(static_cast<int>(i + 1), "error", false, e.what());
    }
  }
  std::printf("%d of %ld criteria failed, %.1f min\n", failures,
              static_cast<long>(std::count(selected.begin(), selected.end(), true)),
              seconds_since(t0) / 60.0);
  return failures == 0 ? 0 : 1;
}
