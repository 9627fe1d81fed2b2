// SPDX-License-Identifier: Apache-2.0
#include "sting/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sting {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t holdout_count(double ratio, std::size_t observed) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw std::invalid_argument("holdout ratio must lie in [0, 1)");
  // Guard against products like 0.29 * 100 = 28.999999999999996.
  return static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(observed) + 1e-9));
}

/// Chooses k distinct indices of [0, n) uniformly, returned sorted.
std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k, Rng &rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i)
    idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void rebuild_delta(TimeSeriesWindow &w) {
  w.delta = build_delta(w.timestamps, w.mask);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string &s, double &out) {
  if (s.empty())
    return false;
  const char *first = s.data();
  const char *last = s.data() + s.size();
  if (*first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_missing_token(const std::string &s) {
  return s.empty() || s == "NaN" || s == "nan" || s == "NA";
}

void write_number(std::ostream &out, double v) {
  if (std::isnan(v))
    return;
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

void write_rows(std::ostream &out, const Matrix &m) {
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index d = 0; d < m.cols(); ++d) {
      if (d > 0)
        out << ',';
      write_number(out, m(t, d));
    }
    out << '\n';
  }
}

} // namespace

double NormalizationStats::normalize(Eigen::Index d, double x) const {
  if (degenerate[d])
    return 0.0;
  return (x - min(d)) / (max(d) - min(d) + eps);
}

double NormalizationStats::denormalize(Eigen::Index d, double y) const {
  if (degenerate[d])
    return min(d);
  return y * (max(d) - min(d) + eps) + min(d);
}

MaskMatrix build_mask(const RawSeries &raw) {
  return raw.values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : 1.0; });
}

DeltaMatrix build_delta(std::span<const double> timestamps,
                        const MaskMatrix &mask) {
  const auto steps = static_cast<Eigen::Index>(timestamps.size());
  if (mask.rows() != steps)
    throw std::invalid_argument("build_delta: mask has " +
                                std::to_string(mask.rows()) + " rows but " +
                                std::to_string(steps) + " timestamps");
  DeltaMatrix delta = DeltaMatrix::Zero(steps, mask.cols());
  for (Eigen::Index t = 1; t < steps; ++t) {
    const double gap = timestamps[t] - timestamps[t - 1];
    if (gap < 0.0)
      throw std::invalid_argument("build_delta: timestamps decrease at step " +
                                  std::to_string(t));
    for (Eigen::Index d = 0; d < mask.cols(); ++d)
      delta(t, d) = mask(t - 1, d) != 0.0 ? gap : gap + delta(t - 1, d);
  }
  return delta;
}

NormalizationStats fit_normalization(const RawSeries &raw) {
  const Eigen::Index D = raw.features();
  NormalizationStats stats;
  stats.min = Vector::Constant(D, std::numeric_limits<double>::infinity());
  stats.max = Vector::Constant(D, -std::numeric_limits<double>::infinity());
  stats.degenerate.assign(D, false);
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index t = 0; t < raw.steps(); ++t) {
      const double v = raw.values(t, d);
      if (std::isnan(v))
        continue;
      stats.min(d) = std::min(stats.min(d), v);
      stats.max(d) = std::max(stats.max(d), v);
    }
    if (!std::isfinite(stats.min(d))) {
      const std::string name = d < static_cast<Eigen::Index>(raw.feature_names.size())
                                   ? raw.feature_names[d]
                                   : "#" + std::to_string(d);
      throw std::invalid_argument("fit_normalization: feature '" + name +
                                  "' has no observed cells");
    }
    stats.degenerate[d] = stats.min(d) == stats.max(d);
  }
  return stats;
}

NormalizationStats fit_normalization(std::span<const TimeSeriesWindow> windows,
                                     const std::vector<std::string> &names) {
  if (windows.empty())
    throw std::invalid_argument("fit_normalization: no windows");
  RawSeries pooled;
  pooled.feature_names = names;
  Eigen::Index rows = 0;
  for (const auto &w : windows)
    rows += w.steps();
  pooled.values.resize(rows, windows.front().features());
  Eigen::Index r = 0;
  for (const auto &w : windows) {
    if (w.features() != pooled.values.cols())
      throw std::invalid_argument("fit_normalization: feature count mismatch");
    for (Eigen::Index t = 0; t < w.steps(); ++t, ++r)
      for (Eigen::Index d = 0; d < w.features(); ++d)
        pooled.values(r, d) = w.mask(t, d) != 0.0 ? w.x_bar(t, d) : kNaN;
  }
  pooled.timestamps.assign(static_cast<std::size_t>(rows), 0.0);
  return fit_normalization(pooled);
}

namespace {

TimeSeriesWindow map_window(const TimeSeriesWindow &window,
                            const NormalizationStats &stats, bool forward) {
  if (window.features() != stats.features())
    throw std::invalid_argument("normalize: window has " +
                                std::to_string(window.features()) +
                                " features, stats have " +
                                std::to_string(stats.features()));
  TimeSeriesWindow out = window;
  auto f = [&](Eigen::Index d, double v) {
    return forward ? stats.normalize(d, v) : stats.denormalize(d, v);
  };
  for (Eigen::Index t = 0; t < out.steps(); ++t)
    for (Eigen::Index d = 0; d < out.features(); ++d)
      out.x_bar(t, d) = out.mask(t, d) != 0.0 ? f(d, window.x_bar(t, d)) : 0.0;
  if (out.ground_truth)
    for (auto &c : out.ground_truth->cells)
      c.value = f(c.feature, c.value);
  return out;
}

Matrix map_values(const Matrix &values, const NormalizationStats &stats,
                  bool forward) {
  if (values.cols() != stats.features())
    throw std::invalid_argument("normalize: feature count mismatch");
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index t = 0; t < values.rows(); ++t)
    for (Eigen::Index d = 0; d < values.cols(); ++d) {
      const double v = values(t, d);
      out(t, d) = std::isnan(v) ? v
                  : forward     ? stats.normalize(d, v)
                                : stats.denormalize(d, v);
    }
  return out;
}

} // namespace

TimeSeriesWindow normalize(const TimeSeriesWindow &window,
                           const NormalizationStats &stats) {
  return map_window(window, stats, true);
}

TimeSeriesWindow denormalize(const TimeSeriesWindow &window,
                             const NormalizationStats &stats) {
  return map_window(window, stats, false);
}

Matrix normalize_values(const Matrix &values, const NormalizationStats &stats) {
  return map_values(values, stats, true);
}

Matrix denormalize_values(const Matrix &values,
                          const NormalizationStats &stats) {
  return map_values(values, stats, false);
}

TimeSeriesWindow make_window(const Matrix &values,
                             std::span<const double> timestamps) {
  if (values.rows() != static_cast<Eigen::Index>(timestamps.size()))
    throw std::invalid_argument("make_window: row/timestamp count mismatch");
  TimeSeriesWindow w;
  w.timestamps.assign(timestamps.begin(), timestamps.end());
  w.mask = values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : 1.0; });
  w.x_bar = values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
  w.delta = build_delta(w.timestamps, w.mask);
  w.valid_steps = values.rows();
  return w;
}

std::vector<TimeSeriesWindow> make_windows(const RawSeries &raw,
                                           Eigen::Index length,
                                           Eigen::Index stride) {
  if (length < 2)
    throw std::invalid_argument("make_windows: length must be >= 2");
  if (stride < 1)
    throw std::invalid_argument("make_windows: stride must be >= 1");
  std::vector<TimeSeriesWindow> out;
  const Eigen::Index T = raw.steps();
  for (Eigen::Index start = 0; start < T; start += stride) {
    const Eigen::Index avail = std::min(length, T - start);
    Matrix values = Matrix::Constant(length, raw.features(), kNaN);
    values.topRows(avail) = raw.values.middleRows(start, avail);
    std::vector<double> ts(raw.timestamps.begin() + start,
                           raw.timestamps.begin() + start + avail);
    double gap = 1.0;
    if (avail >= 2 && ts[avail - 1] - ts[avail - 2] > 0.0)
      gap = ts[avail - 1] - ts[avail - 2];
    while (static_cast<Eigen::Index>(ts.size()) < length)
      ts.push_back(ts.back() + gap);
    TimeSeriesWindow w = make_window(values, ts);
    w.valid_steps = avail;
    w.padded = avail < length;
    w.origin = start;
    out.push_back(std::move(w));
    if (start + length >= T)
      break;
  }
  return out;
}

TimeSeriesWindow reversed(const TimeSeriesWindow &window) {
  TimeSeriesWindow out = window;
  const Eigen::Index T = window.steps();
  out.x_bar = window.x_bar.colwise().reverse();
  out.mask = window.mask.colwise().reverse();
  if (T > 0) {
    const double first = window.timestamps.front();
    const double last = window.timestamps.back();
    for (Eigen::Index t = 0; t < T; ++t)
      out.timestamps[t] = first + last - window.timestamps[T - 1 - t];
  }
  rebuild_delta(out);
  if (out.ground_truth)
    for (auto &c : out.ground_truth->cells)
      c.step = T - 1 - c.step;
  return out;
}

HoldoutResult holdout_mask(const TimeSeriesWindow &window, double ratio,
                           std::uint64_t seed) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> observed;
  for (Eigen::Index t = 0; t < window.steps(); ++t)
    for (Eigen::Index d = 0; d < window.features(); ++d)
      if (window.mask(t, d) != 0.0)
        observed.emplace_back(t, d);
  const std::size_t k = holdout_count(ratio, observed.size());
  Rng rng(seed);
  HoldoutResult res{window, {}};
  for (std::size_t i : choose_subset(observed.size(), k, rng)) {
    const auto [t, d] = observed[i];
    res.targets.cells.push_back({t, d, window.x_bar(t, d)});
    res.train.mask(t, d) = 0.0;
    res.train.x_bar(t, d) = 0.0;
  }
  if (k > 0)
    rebuild_delta(res.train);
  return res;
}

std::vector<TimeSeriesWindow>
holdout_dataset(std::span<const TimeSeriesWindow> windows, double ratio,
                std::uint64_t seed) {
  struct Ref {
    std::size_t w;
    Eigen::Index t, d;
  };
  std::vector<Ref> observed;
  for (std::size_t w = 0; w < windows.size(); ++w)
    for (Eigen::Index t = 0; t < windows[w].steps(); ++t)
      for (Eigen::Index d = 0; d < windows[w].features(); ++d)
        if (windows[w].mask(t, d) != 0.0)
          observed.push_back({w, t, d});
  const std::size_t k = holdout_count(ratio, observed.size());
  Rng rng(seed);
  std::vector<TimeSeriesWindow> out(windows.begin(), windows.end());
  for (auto &w : out)
    w.ground_truth = EvalTargets{};
  for (std::size_t i : choose_subset(observed.size(), k, rng)) {
    const Ref &r = observed[i];
    TimeSeriesWindow &w = out[r.w];
    w.ground_truth->cells.push_back({r.t, r.d, w.x_bar(r.t, r.d)});
    w.mask(r.t, r.d) = 0.0;
    w.x_bar(r.t, r.d) = 0.0;
  }
  for (auto &w : out)
    if (!w.ground_truth->empty())
      rebuild_delta(w);
  return out;
}

TimeSeriesWindow restore_targets(const TimeSeriesWindow &train,
                                 const EvalTargets &targets) {
  TimeSeriesWindow out = train;
  for (const auto &c : targets.cells) {
    out.mask(c.step, c.feature) = 1.0;
    out.x_bar(c.step, c.feature) = c.value;
  }
  rebuild_delta(out);
  return out;
}

RawSeries parse_csv(std::istream &in) {
  RawSeries raw;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.size() < 2)
    throw std::runtime_error("csv: header must name a timestamp column and at "
                             "least one feature");
  raw.feature_names.assign(header.begin() + 1, header.end());
  const std::size_t D = raw.feature_names.size();

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw std::runtime_error("csv: line " + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " fields, found " +
                               std::to_string(fields.size()));
    double ts = 0.0;
    if (!parse_double(fields[0], ts))
      throw std::runtime_error("csv: line " + std::to_string(line_no) +
                               ": non-numeric timestamp '" + fields[0] + "'");
    if (!raw.timestamps.empty() && ts < raw.timestamps.back())
      throw std::runtime_error("csv: line " + std::to_string(line_no) +
                               ": timestamps not sorted ascending");
    raw.timestamps.push_back(ts);
    std::vector<double> row(D);
    for (std::size_t d = 0; d < D; ++d) {
      const std::string &f = fields[d + 1];
      if (is_missing_token(f)) {
        row[d] = kNaN;
      } else if (!parse_double(f, row[d])) {
        throw std::runtime_error("csv: line " + std::to_string(line_no) +
                                 ": non-numeric value '" + f + "' in column '" +
                                 raw.feature_names[d] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  raw.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(D));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t d = 0; d < D; ++d)
      raw.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) =
          rows[t][d];
  return raw;
}

RawSeries load_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("csv: cannot open '" + path + "'");
  return parse_csv(in);
}

void write_csv(std::ostream &out, const RawSeries &raw) {
  out << "t";
  for (const auto &n : raw.feature_names)
    out << ',' << n;
  out << '\n';
  for (Eigen::Index t = 0; t < raw.steps(); ++t) {
    write_number(out, raw.timestamps[t]);
    for (Eigen::Index d = 0; d < raw.features(); ++d) {
      out << ',';
      write_number(out, raw.values(t, d));
    }
    out << '\n';
  }
}

void write_csv(const std::string &path, const RawSeries &raw) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("csv: cannot write '" + path + "'");
  write_csv(out, raw);
}

void write_window_dump(std::ostream &out, const TimeSeriesWindow &window) {
  out << "T,D\n" << window.steps() << ',' << window.features() << '\n';
  out << "values\n";
  write_rows(out, window.x_bar);
  out << "mask\n";
  write_rows(out, window.mask);
  out << "delta\n";
  write_rows(out, window.delta);
  out << "timestamps\n";
  for (std::size_t i = 0; i < window.timestamps.size(); ++i) {
    if (i > 0)
      out << ',';
    write_number(out, window.timestamps[i]);
  }
  out << '\n';
}

TimeSeriesWindow read_window_dump(std::istream &in) {
  auto expect = [&](const std::string &tag) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != tag)
      throw std::runtime_error("window dump: expected '" + tag + "'");
  };
  auto read_row = [&](Eigen::Index n) {
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error("window dump: truncated");
    auto f = split_fields(line);
    if (static_cast<Eigen::Index>(f.size()) != n)
      throw std::runtime_error("window dump: bad row width");
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
      if (!parse_double(f[i], v[i]))
        throw std::runtime_error("window dump: bad number '" + f[i] + "'");
    return v;
  };
  expect("T,D");
  auto dims = read_row(2);
  const auto T = static_cast<Eigen::Index>(dims[0]);
  const auto D = static_cast<Eigen::Index>(dims[1]);
  auto read_matrix = [&](const std::string &tag) {
    expect(tag);
    Matrix m(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
      auto r = read_row(D);
      for (Eigen::Index d = 0; d < D; ++d)
        m(t, d) = r[d];
    }
    return m;
  };
  TimeSeriesWindow w;
  w.x_bar = read_matrix("values");
  w.mask = read_matrix("mask");
  w.delta = read_matrix("delta");
  expect("timestamps");
  w.timestamps = read_row(T);
  w.valid_steps = T;
  return w;
}

} // namespace sting
