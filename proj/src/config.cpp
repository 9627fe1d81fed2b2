// SPDX-License-Identifier: Apache-2.0
#include "sting/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace sting {
namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string &key, const std::string &v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long parse_long(const std::string &key, const std::string &v) {
  long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string &v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty())
      out.push_back(trim(item));
  return out;
}

std::vector<double> parse_doubles(const std::string &key, const std::string &v) {
  std::vector<double> out;
  for (const std::string &s : split_list(v))
    out.push_back(parse_double(key, s));
  return out;
}

template <class T> std::string join(const std::vector<T> &xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i)
      out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += fmt(xs[i]);
    else
      out += xs[i];
  }
  return out;
}

struct Field {
  const char *key;
  std::function<void(ExperimentConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

#define STING_DOUBLE(k, m)                                                     \
  Field{k,                                                                     \
        [](ExperimentConfig &c, const std::string &key,                        \
           const std::string &v) { c.m = parse_double(key, v); },              \
        [](const ExperimentConfig &c) { return fmt(c.m); }}
#define STING_LONG(k, m)                                                       \
  Field{k,                                                                     \
        [](ExperimentConfig &c, const std::string &key,                        \
           const std::string &v) { c.m = parse_long(key, v); },                \
        [](const ExperimentConfig &c) { return std::to_string(c.m); }}
#define STING_BOOL(k, m)                                                       \
  Field{k,                                                                     \
        [](ExperimentConfig &c, const std::string &key,                        \
           const std::string &v) { c.m = parse_bool(key, v); },                \
        [](const ExperimentConfig &c) {                                        \
          return std::string(c.m ? "true" : "false");                          \
        }}
#define STING_STRING(k, m)                                                     \
  Field{k,                                                                     \
        [](ExperimentConfig &c, const std::string &,                           \
           const std::string &v) { c.m = v; },                                 \
        [](const ExperimentConfig &c) { return c.m; }}

const std::vector<Field> &fields() {
  static const std::vector<Field> table = {
      STING_STRING("data.source", data_source),
      STING_STRING("data.path", data_path),
      STING_LONG("synthetic.windows", synthetic_windows),
      STING_LONG("synthetic.steps", synthetic_steps),
      STING_LONG("synthetic.features", synthetic_features),
      STING_DOUBLE("synthetic.noise_sd", synthetic_noise_sd),
      STING_BOOL("synthetic.irregular", synthetic_irregular),
      STING_LONG("window.length", window_length),
      STING_LONG("window.stride", window_stride),
      STING_LONG("model.hidden", hidden),
      STING_LONG("model.disc_hidden", disc_hidden),
      STING_LONG("model.heads", heads),
      STING_BOOL("model.attention", attention),
      STING_BOOL("model.backward", backward),
      STING_DOUBLE("loss.lambda_r", lambda_r),
      STING_DOUBLE("loss.lambda_c", lambda_c),
      STING_DOUBLE("train.lr_g", lr_g),
      STING_DOUBLE("train.lr_d", lr_d),
      STING_LONG("train.batch_size", batch_size),
      STING_LONG("train.pretrain_epochs", pretrain_epochs),
      STING_LONG("train.adversarial_epochs", adversarial_epochs),
      STING_DOUBLE("train.hint_ratio", hint_ratio),
      STING_DOUBLE("train.grad_clip", grad_clip),
      STING_DOUBLE("train.disc_weight_clip", disc_weight_clip),
      STING_LONG("train.checkpoint_every", checkpoint_every),
      STING_DOUBLE("eval.holdout_ratio", holdout_ratio),
      STING_DOUBLE("noise.sd", noise_sd),
      STING_BOOL("search.enabled", search_enabled),
      STING_LONG("search.iterations", search_iterations),
      STING_DOUBLE("search.step_size", search_step_size),
      STING_LONG("knn.k", knn_k),
      STING_LONG("downstream.target", downstream_target),
      Field{"downstream.ratios",
            [](ExperimentConfig &c, const std::string &key,
               const std::string &v) { c.downstream_ratios = parse_doubles(key, v); },
            [](const ExperimentConfig &c) { return join(c.downstream_ratios); }},
      STING_LONG("downstream.epochs", downstream_epochs),
      STING_LONG("downstream.hidden", downstream_hidden),
      STING_DOUBLE("downstream.dropout", downstream_dropout),
      STING_DOUBLE("downstream.lr", downstream_lr),
      STING_DOUBLE("downstream.train_fraction", downstream_train_fraction),
      Field{"curves.ratios",
            [](ExperimentConfig &c, const std::string &key,
               const std::string &v) { c.curve_ratios = parse_doubles(key, v); },
            [](const ExperimentConfig &c) { return join(c.curve_ratios); }},
      Field{"ablation.variants",
            [](ExperimentConfig &c, const std::string &, const std::string &v) {
              c.ablation_variants = split_list(v);
            },
            [](const ExperimentConfig &c) { return join(c.ablation_variants); }},
      STING_BOOL("log.wall_time", log_wall_time),
      Field{"seed",
            [](ExperimentConfig &c, const std::string &key,
               const std::string &v) {
              std::uint64_t s = 0;
              const auto r = std::from_chars(v.data(), v.data() + v.size(), s);
              if (r.ec != std::errc() || r.ptr != v.data() + v.size())
                throw ConfigError(key + ": expected an unsigned integer, got '" +
                                  v + "'");
              c.seed = s;
              c.has_seed = true;
            },
            [](const ExperimentConfig &c) { return std::to_string(c.seed); }},
      STING_STRING("output.dir", output_dir),
  };
  return table;
}

#undef STING_DOUBLE
#undef STING_LONG
#undef STING_BOOL
#undef STING_STRING

void require(bool ok, const std::string &message) {
  if (!ok)
    throw ConfigError(message);
}

} // namespace

void ExperimentConfig::set(const std::string &key, const std::string &value) {
  for (const Field &f : fields())
    if (key == f.key) {
      f.set(*this, key, trim(value));
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::validate() const {
  require(has_seed, "seed: required field is missing");
  require(!output_dir.empty(), "output.dir: required field is missing");
  require(data_source == "csv" || data_source == "synthetic",
          "data.source: must be 'csv' or 'synthetic'");
  if (data_source == "csv")
    require(!data_path.empty(), "data.path: required when data.source = csv");
  else {
    require(synthetic_windows >= 1, "synthetic.windows: must be >= 1");
    require(synthetic_steps >= 8, "synthetic.steps: must be >= 8");
    require(synthetic_features >= 2, "synthetic.features: must be >= 2");
    require(synthetic_noise_sd >= 0.0, "synthetic.noise_sd: must be >= 0");
  }
  require(window_length >= 1, "window.length: must be >= 1");
  require(window_stride >= 1, "window.stride: must be >= 1");
  require(hidden >= 1, "model.hidden: must be >= 1");
  require(disc_hidden >= 1, "model.disc_hidden: must be >= 1");
  require(heads >= 1, "model.heads: must be >= 1");
  require(lambda_r >= 0.0, "loss.lambda_r: must be >= 0");
  require(lambda_c >= 0.0, "loss.lambda_c: must be >= 0");
  require(lr_g > 0.0, "train.lr_g: must be positive");
  require(lr_d > 0.0, "train.lr_d: must be positive");
  require(batch_size >= 1, "train.batch_size: must be >= 1");
  require(pretrain_epochs >= 0, "train.pretrain_epochs: must be >= 0");
  require(adversarial_epochs >= 0, "train.adversarial_epochs: must be >= 0");
  require(hint_ratio >= 0.0 && hint_ratio <= 1.0,
          "train.hint_ratio: must lie in [0, 1]");
  require(grad_clip >= 0.0, "train.grad_clip: must be >= 0");
  require(disc_weight_clip >= 0.0, "train.disc_weight_clip: must be >= 0");
  require(checkpoint_every >= 0, "train.checkpoint_every: must be >= 0");
  require(holdout_ratio >= 0.0 && holdout_ratio < 1.0,
          "eval.holdout_ratio: must lie in [0, 1)");
  require(noise_sd >= 0.0, "noise.sd: must be >= 0");
  require(search_iterations >= 0, "search.iterations: must be >= 0");
  require(search_step_size >= 0.0, "search.step_size: must be >= 0");
  require(knn_k >= 1, "knn.k: must be >= 1");
  require(downstream_epochs >= 0, "downstream.epochs: must be >= 0");
  require(downstream_hidden >= 1, "downstream.hidden: must be >= 1");
  require(downstream_dropout >= 0.0 && downstream_dropout < 1.0,
          "downstream.dropout: must lie in [0, 1)");
  require(downstream_lr > 0.0, "downstream.lr: must be positive");
  require(downstream_train_fraction > 0.0 && downstream_train_fraction < 1.0,
          "downstream.train_fraction: must lie in (0, 1)");
  for (double r : downstream_ratios)
    require(r >= 0.0 && r < 1.0, "downstream.ratios: each ratio must lie in [0, 1)");
  for (double r : curve_ratios)
    require(r > 0.0 && r < 1.0, "curves.ratios: each ratio must lie in (0, 1)");
  for (const std::string &v : ablation_variants)
    require(v == "full" || v == "no_attention" || v == "no_search" ||
                v == "no_backward",
            "ablation.variants: unknown variant '" + v + "'");
}

std::string ExperimentConfig::serialize() const {
  std::string out;
  for (const Field &f : fields()) {
    if (std::string(f.key) == "seed" && !has_seed)
      continue;
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += "\n";
  }
  return out;
}

void apply_config_text(ExperimentConfig &config, std::istream &in,
                       const std::string &source) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError &e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(ExperimentConfig &config, const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(config, in, path);
}

void apply_override(ExperimentConfig &config, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "': expected key=value");
  config.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field &f : fields())
    out.emplace_back(f.key);
  return out;
}

} // namespace sting
