// SPDX-License-Identifier: Apache-2.0
#include "sting/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sting {

std::vector<RawSeries> gen_sinusoid_mix(const SinusoidSpec &spec) {
  if (spec.steps < 8)
    throw std::invalid_argument("gen_sinusoid_mix: T must be >= 8");
  if (spec.features < 2)
    throw std::invalid_argument("gen_sinusoid_mix: D must be >= 2");
  if (spec.windows < 1)
    throw std::invalid_argument("gen_sinusoid_mix: need at least one window");
  if (spec.noise_sd < 0.0)
    throw std::invalid_argument("gen_sinusoid_mix: noise_sd must be >= 0");
  if (!(spec.period_min > 0.0 && spec.period_max >= spec.period_min))
    throw std::invalid_argument("gen_sinusoid_mix: invalid period range");

  const Eigen::Index T = spec.steps;
  const Eigen::Index D = spec.features;
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector period(D), amplitude(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    period(d) = spec.period_min + (spec.period_max - spec.period_min) * unit(rng);
    amplitude(d) = 0.5 + unit(rng);
  }
  Matrix mix = Matrix::Identity(D, D);
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < D; ++j)
      if (i != j)
        mix(i, j) = spec.mixing * (2.0 * unit(rng) - 1.0);

  std::vector<std::string> names;
  for (Eigen::Index d = 0; d < D; ++d)
    names.push_back("f" + std::to_string(d));

  std::vector<RawSeries> out;
  out.reserve(spec.windows);
  for (Eigen::Index w = 0; w < spec.windows; ++w) {
    RawSeries s;
    s.feature_names = names;
    s.timestamps.resize(T);
    double clock = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      s.timestamps[t] = clock;
      clock += 1.0;
      if (spec.irregular)
        while (unit(rng) < 0.5)
          clock += 1.0;
    }
    Vector phase(D);
    for (Eigen::Index d = 0; d < D; ++d)
      phase(d) = 2.0 * std::numbers::pi * unit(rng);
    Matrix base(T, D);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index d = 0; d < D; ++d)
        base(t, d) = amplitude(d) *
                     std::sin(2.0 * std::numbers::pi * s.timestamps[t] /
                                  period(d) +
                              phase(d));
    s.values = base * mix.transpose();
    if (spec.noise_sd > 0.0)
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index d = 0; d < D; ++d)
          s.values(t, d) += spec.noise_sd * gauss(rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RawSeries> gen_sinusoid_mix(Eigen::Index n_windows, Eigen::Index T,
                                        Eigen::Index D, double noise_sd,
                                        std::uint64_t seed) {
  SinusoidSpec spec;
  spec.windows = n_windows;
  spec.steps = T;
  spec.features = D;
  spec.noise_sd = noise_sd;
  spec.seed = seed;
  return gen_sinusoid_mix(spec);
}

RawSeries corrupt_mcar(const RawSeries &series, double ratio,
                       std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw std::invalid_argument("corrupt_mcar: ratio must lie in [0, 1)");
  RawSeries out = series;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index t = 0; t < out.steps(); ++t)
    for (Eigen::Index d = 0; d < out.features(); ++d)
      if (unit(rng) < ratio)
        out.values(t, d) = std::numeric_limits<double>::quiet_NaN();
  return out;
}

RawSeries concatenate(const std::vector<RawSeries> &parts) {
  RawSeries out;
  if (parts.empty())
    return out;
  out.feature_names = parts.front().feature_names;
  Eigen::Index rows = 0;
  for (const RawSeries &p : parts) {
    if (p.features() != parts.front().features())
      throw std::invalid_argument("concatenate: feature counts differ");
    rows += p.steps();
  }
  out.values.resize(rows, parts.front().features());
  out.timestamps.reserve(rows);
  Eigen::Index r = 0;
  double offset = 0.0;
  for (const RawSeries &p : parts) {
    if (p.steps() == 0)
      continue;
    const double shift = out.timestamps.empty()
                             ? 0.0
                             : offset - p.timestamps.front();
    for (double ts : p.timestamps)
      out.timestamps.push_back(ts + shift);
    out.values.middleRows(r, p.steps()) = p.values;
    r += p.steps();
    offset = out.timestamps.back() + 1.0;
  }
  return out;
}

} // namespace sting
