// SPDX-License-Identifier: Apache-2.0
#include "sting/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sting {

double rmse_heldout(const Matrix &imputed, const EvalTargets &targets) {
  if (targets.empty())
    throw std::invalid_argument("rmse_heldout: no held-out targets");
  double sq = 0.0;
  for (const HeldOutCell &c : targets.cells) {
    if (c.step >= imputed.rows() || c.feature >= imputed.cols())
      throw std::invalid_argument("rmse_heldout: target outside the matrix");
    const double e = imputed(c.step, c.feature) - c.value;
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(targets.cells.size()));
}

double rmse_heldout(std::span<const Matrix> imputed,
                    std::span<const TimeSeriesWindow> windows) {
  if (imputed.size() != windows.size())
    throw std::invalid_argument("rmse_heldout: window count mismatch");
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    if (!windows[k].ground_truth)
      continue;
    for (const HeldOutCell &c : windows[k].ground_truth->cells) {
      const double e = imputed[k](c.step, c.feature) - c.value;
      sq += e * e;
      ++n;
    }
  }
  if (n == 0)
    throw std::invalid_argument("rmse_heldout: no held-out targets");
  return std::sqrt(sq / static_cast<double>(n));
}

Vector feature_means(std::span<const TimeSeriesWindow> windows) {
  if (windows.empty())
    throw std::invalid_argument("feature_means: no windows");
  const Eigen::Index D = windows.front().features();
  Vector sum = Vector::Zero(D), count = Vector::Zero(D);
  for (const TimeSeriesWindow &w : windows) {
    sum += w.x_bar.cwiseProduct(w.mask).colwise().sum().transpose();
    count += w.mask.colwise().sum().transpose();
  }
  Vector out(D);
  for (Eigen::Index d = 0; d < D; ++d)
    out(d) = count(d) > 0.0 ? sum(d) / count(d) : 0.0;
  return out;
}

Matrix baseline_mean(const TimeSeriesWindow &w, const Vector &means) {
  if (means.size() != w.features())
    throw std::invalid_argument("baseline_mean: feature count mismatch");
  Matrix out = w.x_bar;
  for (Eigen::Index t = 0; t < w.steps(); ++t)
    for (Eigen::Index d = 0; d < w.features(); ++d)
      if (w.mask(t, d) == 0.0)
        out(t, d) = means(d);
  return out;
}

Matrix baseline_prev(const TimeSeriesWindow &w, const Vector &means) {
  if (means.size() != w.features())
    throw std::invalid_argument("baseline_prev: feature count mismatch");
  Matrix out = w.x_bar;
  for (Eigen::Index d = 0; d < w.features(); ++d) {
    double last = means(d);
    for (Eigen::Index t = 0; t < w.steps(); ++t) {
      if (w.mask(t, d) != 0.0)
        last = w.x_bar(t, d);
      else
        out(t, d) = last;
    }
  }
  return out;
}

std::vector<Matrix> baseline_knn(std::span<const TimeSeriesWindow> windows,
                                 Eigen::Index k, const Vector &means) {
  if (k < 1)
    throw std::invalid_argument("baseline_knn: k must be >= 1");
  const std::size_t N = windows.size();
  std::vector<Matrix> out;
  out.reserve(N);
  if (N == 0)
    return out;
  const Eigen::Index cells = windows.front().x_bar.size();
  for (const TimeSeriesWindow &w : windows)
    if (w.x_bar.size() != cells)
      throw std::invalid_argument("baseline_knn: windows differ in shape");

  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const TimeSeriesWindow &wi = windows[i];
    const double *xi = wi.x_bar.data();
    const double *mi = wi.mask.data();
    dist.clear();
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i)
        continue;
      const double *xj = windows[j].x_bar.data();
      const double *mj = windows[j].mask.data();
      double s = 0.0, c = 0.0;
      for (Eigen::Index e = 0; e < cells; ++e) {
        const double w = mi[e] * mj[e];
        const double diff = xi[e] - xj[e];
        s += w * diff * diff;
        c += w;
      }
      if (c > 0.0)
        dist.emplace_back(s / c, j);
    }
    const std::size_t kk = std::min<std::size_t>(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());

    Matrix filled = baseline_mean(wi, means);
    for (Eigen::Index t = 0; t < wi.steps(); ++t)
      for (Eigen::Index d = 0; d < wi.features(); ++d) {
        if (wi.mask(t, d) != 0.0)
          continue;
        double s = 0.0;
        int n = 0;
        for (std::size_t r = 0; r < kk; ++r) {
          const TimeSeriesWindow &nb = windows[dist[r].second];
          if (nb.mask(t, d) != 0.0) {
            s += nb.x_bar(t, d);
            ++n;
          }
        }
        if (n > 0)
          filled(t, d) = s / n;
      }
    out.push_back(std::move(filled));
  }
  return out;
}

std::vector<NamedImputer> baseline_imputers(const Vector &means,
                                            Eigen::Index knn_k) {
  std::vector<NamedImputer> out;
  out.push_back({"Mean", [means](std::span<const TimeSeriesWindow> ws) {
                   std::vector<Matrix> r;
                   for (const auto &w : ws)
                     r.push_back(baseline_mean(w, means));
                   return r;
                 }});
  out.push_back({"Prev", [means](std::span<const TimeSeriesWindow> ws) {
                   std::vector<Matrix> r;
                   for (const auto &w : ws)
                     r.push_back(baseline_prev(w, means));
                   return r;
                 }});
  out.push_back({"KNN", [means, knn_k](std::span<const TimeSeriesWindow> ws) {
                   return baseline_knn(ws, knn_k, means);
                 }});
  return out;
}

NamedImputer sting_imputer(const StingModel &model,
                           const InferenceOptions &options, std::uint64_t seed,
                           const std::string &name) {
  return {name, [&model, options, seed](std::span<const TimeSeriesWindow> ws) {
            Rng rng(seed);
            InferenceReport rep = impute_windows(model, ws, options, rng);
            std::vector<Matrix> r;
            r.reserve(rep.results.size());
            for (ImputationResult &x : rep.results)
              r.push_back(std::move(x.values));
            return r;
          }};
}

InferenceOptions inference_options_from(const ExperimentConfig &c) {
  InferenceOptions o;
  o.search = c.search_enabled;
  o.iterations = c.search_iterations;
  o.step_size = c.search_step_size;
  o.noise_sd = c.noise_sd;
  o.batch_size = c.batch_size;
  o.weights = {c.lambda_r, c.lambda_c};
  return o;
}

std::vector<ScoreRow> score_imputers(std::span<const TimeSeriesWindow> windows,
                                     const std::vector<NamedImputer> &imputers) {
  std::vector<ScoreRow> out;
  for (const NamedImputer &imp : imputers) {
    const std::vector<Matrix> filled = imp.impute(windows);
    out.push_back({imp.name, rmse_heldout(filled, windows)});
  }
  return out;
}

namespace {

std::vector<TimeSeriesWindow>
corrupt_selected(std::span<const TimeSeriesWindow> windows, double ratio,
                 std::uint64_t seed, const std::vector<bool> &allowed) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw std::invalid_argument("corrupt: ratio must lie in [0, 1)");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TimeSeriesWindow> out(windows.begin(), windows.end());
  for (TimeSeriesWindow &w : out) {
    bool changed = false;
    for (Eigen::Index t = 0; t < w.steps(); ++t)
      for (Eigen::Index d = 0; d < w.features(); ++d) {
        const double u = unit(rng);
        if (!allowed[d] || w.mask(t, d) == 0.0 || u >= ratio)
          continue;
        w.mask(t, d) = 0.0;
        w.x_bar(t, d) = 0.0;
        changed = true;
      }
    if (changed)
      w.delta = build_delta(w.timestamps, w.mask);
  }
  return out;
}

double sequence_rmse(const std::vector<Matrix> &pred,
                     const std::vector<Matrix> &truth) {
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    sq += (pred[k] - truth[k]).squaredNorm();
    n += static_cast<std::size_t>(truth[k].size());
  }
  return std::sqrt(sq / static_cast<double>(std::max<std::size_t>(n, 1)));
}

} // namespace

std::vector<TimeSeriesWindow>
corrupt_windows(std::span<const TimeSeriesWindow> windows, double ratio,
                std::uint64_t seed) {
  const Eigen::Index D = windows.empty() ? 0 : windows.front().features();
  return corrupt_selected(windows, ratio, seed, std::vector<bool>(D, true));
}

std::vector<TimeSeriesWindow>
drop_feature(std::span<const TimeSeriesWindow> windows, Eigen::Index feature) {
  std::vector<TimeSeriesWindow> out;
  out.reserve(windows.size());
  for (const TimeSeriesWindow &w : windows) {
    const Eigen::Index D = w.features();
    if (feature < 0 || feature >= D)
      throw std::invalid_argument("drop_feature: feature index out of range");
    auto drop = [&](const Matrix &m) {
      Matrix r(m.rows(), D - 1);
      r.leftCols(feature) = m.leftCols(feature);
      r.rightCols(D - 1 - feature) = m.rightCols(D - 1 - feature);
      return r;
    };
    TimeSeriesWindow v = w;
    v.x_bar = drop(w.x_bar);
    v.mask = drop(w.mask);
    v.delta = drop(w.delta);
    if (w.ground_truth) {
      EvalTargets g;
      for (HeldOutCell c : w.ground_truth->cells) {
        if (c.feature == feature)
          continue;
        if (c.feature > feature)
          --c.feature;
        g.cells.push_back(c);
      }
      v.ground_truth = g;
    }
    out.push_back(std::move(v));
  }
  return out;
}

GruRegressor GruRegressor::init(Eigen::Index inputs,
                                const RegressorOptions &options, Rng &rng) {
  GruRegressor r;
  r.layer1 = GruCellParams::init("reg/l1", inputs, options.hidden, rng);
  r.layer2 = GruCellParams::init("reg/l2", options.hidden, options.hidden, rng);
  r.head_w = Parameter("reg/head_w",
                       uniform_init(1, options.hidden, options.hidden, rng));
  r.head_b = Parameter("reg/head_b", Matrix::Zero(1, 1));
  r.dropout = options.dropout;
  return r;
}

ParameterList GruRegressor::parameters() {
  ParameterList out = layer1.parameters();
  for (Parameter *p : layer2.parameters())
    out.push_back(p);
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

namespace {

/// Returns predictions as 1 x T*B. `rng` null disables dropout.
ad::Var regress(ad::Tape &t, const GruRegressor &r, bool track,
                const Matrix &packed, Eigen::Index T, Eigen::Index B,
                Rng *rng) {
  const ad::GruVars l1 = ad::bind(t, r.layer1, track);
  const ad::GruVars l2 = ad::bind(t, r.layer2, track);
  const ad::Var hw = t.parameter(r.head_w, track);
  const ad::Var hb = t.parameter(r.head_b, track);
  const Eigen::Index H = r.layer1.hidden_size();
  const ad::Var x = t.constant(packed);
  ad::Var h1 = t.constant(Matrix::Zero(H, B));
  ad::Var h2 = h1;
  std::bernoulli_distribution keep(1.0 - r.dropout);
  std::vector<ad::Var> ys;
  ys.reserve(T);
  for (Eigen::Index s = 0; s < T; ++s) {
    h1 = ad::gru_cell(t, ad::slice_cols(t, x, s * B, B), h1, l1);
    ad::Var mid = h1;
    if (rng != nullptr && r.dropout > 0.0) {
      Matrix m(H, B);
      for (Eigen::Index j = 0; j < B; ++j)
        for (Eigen::Index i = 0; i < H; ++i)
          m(i, j) = keep(*rng) ? 1.0 / (1.0 - r.dropout) : 0.0;
      mid = ad::mul_const(t, h1, m);
    }
    h2 = ad::gru_cell(t, mid, h2, l2);
    ys.push_back(ad::affine(t, hw, h2, hb));
  }
  return ad::concat_cols(t, ys);
}

} // namespace

void GruRegressor::fit(std::span<const Matrix> inputs,
                       std::span<const Matrix> targets,
                       const RegressorOptions &options, Rng &rng) {
  if (inputs.size() != targets.size() || inputs.empty())
    throw std::invalid_argument("regressor: need matching non-empty data");
  Adam opt(options.lr);
  const ParameterList params = parameters();
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(std::max<Eigen::Index>(1, options.batch_size));
  for (long e = 0; e < options.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += bs) {
      std::vector<Matrix> xs, ys;
      for (std::size_t j = i; j < std::min(order.size(), i + bs); ++j) {
        xs.push_back(inputs[order[j]]);
        ys.push_back(targets[order[j]]);
      }
      const Eigen::Index T = xs.front().rows();
      const Eigen::Index B = static_cast<Eigen::Index>(xs.size());
      ad::Tape t;
      const ad::Var pred = regress(t, *this, true, pack_sequences(xs), T, B, &rng);
      const Matrix y = pack_sequences(ys);
      const ad::Var per = ad::masked_mse(t, pred, y, Matrix::Ones(1, T * B), B);
      const ad::Var loss = ad::weighted_sum(t, per, RowVector::Constant(B, 1.0 / B));
      zero_grads(params);
      t.backward(loss);
      clip_grad_norm(params, 5.0);
      opt.step(params);
    }
  }
}

std::vector<Matrix> GruRegressor::predict(std::span<const Matrix> inputs) const {
  std::vector<Matrix> out;
  const std::size_t bs = 256;
  for (std::size_t i = 0; i < inputs.size(); i += bs) {
    const auto chunk = inputs.subspan(i, std::min(bs, inputs.size() - i));
    const Eigen::Index T = chunk.front().rows();
    const Eigen::Index B = static_cast<Eigen::Index>(chunk.size());
    ad::Tape t;
    const ad::Var pred = regress(t, *this, false, pack_sequences(chunk), T, B, nullptr);
    for (Matrix &m : unpack_sequences(t.value(pred), T, B))
      out.push_back(std::move(m));
  }
  return out;
}

DownstreamSplit split_dataset(std::span<const TimeSeriesWindow> windows,
                              double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  if (windows.size() < 2)
    throw std::invalid_argument("split: need at least two windows");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(windows.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, windows.size() - 1);
  DownstreamSplit s;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? s.train : s.test).push_back(windows[order[i]]);
  return s;
}

DownstreamTable downstream_eval(const DownstreamSplit &split,
                                const std::vector<NamedImputer> &imputers,
                                const DownstreamOptions &options) {
  if (split.train.empty() || split.test.empty())
    throw std::invalid_argument("downstream: empty split");
  const Eigen::Index D = split.train.front().features();
  if (D < 2)
    throw std::invalid_argument("downstream: need a target and an input feature");
  const Eigen::Index target = options.target < 0 ? D - 1 : options.target;
  if (target >= D)
    throw std::invalid_argument("downstream: target feature out of range");
  std::vector<bool> allowed(D - 1, options.corrupted.empty());
  for (Eigen::Index f : options.corrupted) {
    if (f == target)
      throw std::invalid_argument(
          "downstream: the target feature cannot be corrupted");
    if (f < 0 || f >= D)
      throw std::invalid_argument("downstream: corrupted feature out of range");
    allowed[f > target ? f - 1 : f] = true;
  }
  for (const TimeSeriesWindow &w : split.train)
    if (w.mask.minCoeff() == 0.0)
      throw std::invalid_argument("downstream: dataset must be complete");
  for (const TimeSeriesWindow &w : split.test)
    if (w.mask.minCoeff() == 0.0)
      throw std::invalid_argument("downstream: dataset must be complete");

  auto inputs_of = [&](std::span<const TimeSeriesWindow> ws) {
    std::vector<Matrix> out;
    for (const TimeSeriesWindow &w : drop_feature(ws, target))
      out.push_back(w.x_bar);
    return out;
  };
  auto targets_of = [&](std::span<const TimeSeriesWindow> ws) {
    std::vector<Matrix> out;
    for (const TimeSeriesWindow &w : ws)
      out.push_back(w.x_bar.col(target));
    return out;
  };

  Rng rng(options.seed);
  GruRegressor reg = GruRegressor::init(D - 1, options.regressor, rng);
  reg.fit(inputs_of(split.train), targets_of(split.train), options.regressor,
          rng);

  const std::vector<TimeSeriesWindow> test_in = drop_feature(split.test, target);
  const std::vector<Matrix> truth = targets_of(split.test);
  std::vector<Matrix> clean;
  for (const TimeSeriesWindow &w : test_in)
    clean.push_back(w.x_bar);
  const double ideal = sequence_rmse(reg.predict(clean), truth);

  DownstreamTable table;
  table.ratios = options.ratios;
  for (const NamedImputer &imp : imputers)
    table.rows.push_back(imp.name);
  table.rows.push_back("Ideal");
  table.rmse.resize(static_cast<Eigen::Index>(table.rows.size()),
                    static_cast<Eigen::Index>(options.ratios.size()));
  for (std::size_t r = 0; r < options.ratios.size(); ++r) {
    const std::uint64_t seed = rng();
    const auto corrupted =
        corrupt_selected(test_in, options.ratios[r], seed, allowed);
    for (std::size_t i = 0; i < imputers.size(); ++i)
      table.rmse(i, r) =
          sequence_rmse(reg.predict(imputers[i].impute(corrupted)), truth);
    table.rmse(imputers.size(), r) = ideal;
  }
  return table;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig &config,
                                      std::span<const TimeSeriesWindow> windows,
                                      const EpochCallback &on_epoch) {
  const InferenceOptions base = inference_options_from(config);
  const std::uint64_t infer_seed = config.seed ^ 0x5851f42d4c957f2dULL;

  const TrainState full = fit(config, windows, on_epoch);
  auto score = [&](const StingModel &model, bool search) {
    InferenceOptions o = base;
    o.search = search;
    const NamedImputer imp = sting_imputer(model, o, infer_seed);
    return rmse_heldout(imp.impute(windows), windows);
  };
  auto hash = [](const StingModel &m) {
    StingModel copy = m;
    return parameter_hash(copy);
  };
  const double full_rmse = score(full.model, base.search);

  std::vector<AblationRow> rows;
  for (const std::string &v : config.ablation_variants) {
    AblationRow row;
    row.variant = v;
    if (v == "full") {
      row.rmse = full_rmse;
      row.checkpoint_hash = hash(full.model);
    } else if (v == "no_search") {
      row.rmse = score(full.model, false);
      row.checkpoint_hash = hash(full.model);
    } else if (v == "no_attention" || v == "no_backward") {
      ExperimentConfig c = config;
      (v == "no_attention" ? c.attention : c.backward) = false;
      const TrainState s = fit(c, windows, on_epoch);
      row.rmse = score(s.model, base.search);
      row.checkpoint_hash = hash(s.model);
    } else {
      throw std::invalid_argument("ablation: unknown variant '" + v + "'");
    }
    row.increase_pct = 100.0 * (row.rmse - full_rmse) / full_rmse;
    rows.push_back(row);
  }
  return rows;
}

std::string format_number(double v, int precision) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::fixed, precision);
  return std::string(buf, r.ptr);
}

std::string Table::to_csv() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << (i ? "," : "") << cells[i];
    out << "\n";
  };
  line(columns);
  for (const auto &r : rows)
    line(r);
  return out.str();
}

std::string Table::to_text() const {
  std::vector<std::size_t> width(columns.size(), 0);
  auto measure = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i)
      width[i] = std::max(width[i], cells[i].size());
  };
  measure(columns);
  for (const auto &r : rows)
    measure(r);
  std::ostringstream out;
  auto line = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) {
      const std::string pad(width[i] - cells[i].size(), ' ');
      if (i)
        out << "  ";
      out << (i == 0 ? cells[i] + pad : pad + cells[i]);
    }
    out << "\n";
  };
  line(columns);
  std::size_t total = 0;
  for (std::size_t w : width)
    total += w;
  out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-')
      << "\n";
  for (const auto &r : rows)
    line(r);
  return out.str();
}

Table score_table(const std::vector<ScoreRow> &rows) {
  Table t;
  t.columns = {"imputer", "rmse"};
  for (const ScoreRow &r : rows)
    t.rows.push_back({r.name, format_number(r.rmse, 6)});
  return t;
}

Table ablation_table(const std::vector<AblationRow> &rows) {
  Table t;
  t.columns = {"variant", "rmse", "increase_pct", "checkpoint_hash"};
  for (const AblationRow &r : rows) {
    std::ostringstream h;
    h << std::hex << r.checkpoint_hash;
    t.rows.push_back({r.variant, format_number(r.rmse, 6),
                      format_number(r.increase_pct, 2), h.str()});
  }
  return t;
}

Table downstream_table(const DownstreamTable &d) {
  Table t;
  t.columns.push_back("imputer");
  for (double r : d.ratios)
    t.columns.push_back("ratio_" + format_number(r, 2));
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    std::vector<std::string> row = {d.rows[i]};
    for (Eigen::Index j = 0; j < d.rmse.cols(); ++j)
      row.push_back(format_number(d.rmse(static_cast<Eigen::Index>(i), j), 6));
    t.rows.push_back(row);
  }
  return t;
}

} // namespace sting
