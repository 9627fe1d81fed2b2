// SPDX-License-Identifier: Apache-2.0
#include "sting/experiment.hpp"

#include <filesystem>
#include <fstream>

#include "sting/synthetic.hpp"

namespace sting {
namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  // splitmix64 finalizer over seed and stream id.
  std::uint64_t z =
      seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset load_dataset(const ExperimentConfig &config) {
  Dataset d;
  if (config.data_source == "csv") {
    d.raw = load_csv(config.data_path);
  } else {
    SinusoidSpec spec;
    spec.windows = config.synthetic_windows;
    spec.steps = config.synthetic_steps;
    spec.features = config.synthetic_features;
    spec.noise_sd = config.synthetic_noise_sd;
    spec.irregular = config.synthetic_irregular;
    spec.seed = derive_seed(config.seed, SeedStream::data);
    d.raw = concatenate(gen_sinusoid_mix(spec));
  }
  d.norm = fit_normalization(d.raw);
  for (const TimeSeriesWindow &w :
       make_windows(d.raw, config.window_length, config.window_stride))
    d.windows.push_back(normalize(w, d.norm));
  return d;
}

std::vector<TimeSeriesWindow> holdout_windows(const Dataset &data,
                                              const ExperimentConfig &config) {
  return holdout_dataset(data.windows, config.holdout_ratio,
                         derive_seed(config.seed, SeedStream::holdout));
}

void prepare_output(const ExperimentConfig &config) {
  fs::create_directories(config.output_dir);
  std::ofstream out(fs::path(config.output_dir) / "config.txt",
                    std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write config to '" + config.output_dir +
                             "'");
  out << config.serialize();
}

std::string checkpoint_path(const ExperimentConfig &config) {
  return (fs::path(config.output_dir) / "checkpoint.bin").string();
}

std::string metrics_path(const ExperimentConfig &config) {
  return (fs::path(config.output_dir) / "metrics.jsonl").string();
}

namespace {

void write_table(const ExperimentConfig &config, const std::string &stem,
                 const Table &t) {
  const fs::path dir(config.output_dir);
  std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
  csv << t.to_csv();
  std::ofstream txt(dir / (stem + ".txt"), std::ios::binary);
  txt << t.to_text();
  if (!csv || !txt)
    throw std::runtime_error("cannot write table '" + stem + "'");
}

Checkpoint make_checkpoint(const TrainState &state, const Dataset &data,
                           const ExperimentConfig &config) {
  Checkpoint ck;
  ck.state = state;
  ck.norm = data.norm;
  ck.feature_names = data.raw.feature_names;
  ck.config_text = config.serialize();
  return ck;
}

} // namespace

TrainOutcome cmd_train(const ExperimentConfig &config, bool resume) {
  config.validate();
  prepare_output(config);
  const Dataset data = load_dataset(config);
  const std::vector<TimeSeriesWindow> train = holdout_windows(data, config);

  TrainOutcome out;
  out.checkpoint = checkpoint_path(config);
  out.metrics = metrics_path(config);
  if (resume && fs::exists(out.checkpoint)) {
    out.state = load_checkpoint(out.checkpoint).state;
  } else {
    if (train.empty())
      throw std::invalid_argument("training: empty dataset");
    out.state = TrainState::init(
        model_config_from(config, train.front().features()),
        TrainOptions::from_config(config), config.seed);
  }
  const long every = config.checkpoint_every;
  fit(out.state, config, train, [&](const TrainState &s) {
    if (every > 0 && s.epoch % every == 0)
      save_checkpoint(out.checkpoint, make_checkpoint(s, data, config));
  });
  save_checkpoint(out.checkpoint, make_checkpoint(out.state, data, config));
  write_metrics_log(out.metrics, out.state.epochs);
  return out;
}

ImputeOutcome cmd_impute(const ExperimentConfig &config,
                         const std::string &checkpoint,
                         const std::string &input_csv) {
  config.validate();
  prepare_output(config);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const RawSeries raw = load_csv(input_csv);
  Rng rng(derive_seed(config.seed, SeedStream::inference));
  const SeriesImputation res =
      impute_series(ck.state.model, ck.norm, raw, config.window_length,
                    inference_options_from(config), rng);

  ImputeOutcome out;
  const fs::path dir(config.output_dir);
  out.imputed_csv = (dir / "imputed.csv").string();
  out.provenance_csv = (dir / "provenance.csv").string();
  write_csv(out.imputed_csv, res.imputed);
  RawSeries prov = raw;
  prov.values = res.provenance;
  write_csv(out.provenance_csv, prov);
  out.generated_cells = static_cast<long>(res.provenance.sum());
  out.out_of_range_cells = static_cast<long>(res.out_of_range.sum());
  return out;
}

std::vector<ScoreRow> cmd_evaluate(const ExperimentConfig &config,
                                   const std::string &checkpoint) {
  config.validate();
  prepare_output(config);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(config);
  const std::vector<TimeSeriesWindow> windows = holdout_windows(data, config);
  std::vector<NamedImputer> imputers = {sting_imputer(
      ck.state.model, inference_options_from(config),
      derive_seed(config.seed, SeedStream::inference))};
  for (NamedImputer &b : baseline_imputers(feature_means(windows), config.knn_k))
    imputers.push_back(std::move(b));
  const std::vector<ScoreRow> rows = score_imputers(windows, imputers);
  write_table(config, "evaluate", score_table(rows));
  return rows;
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig &config) {
  config.validate();
  prepare_output(config);
  const Dataset data = load_dataset(config);
  const std::vector<AblationRow> rows =
      run_ablation(config, holdout_windows(data, config));
  write_table(config, "ablation", ablation_table(rows));
  return rows;
}

DownstreamTable cmd_downstream(const ExperimentConfig &config) {
  config.validate();
  prepare_output(config);
  const Dataset data = load_dataset(config);
  const DownstreamSplit split =
      split_dataset(data.windows, config.downstream_train_fraction,
                    derive_seed(config.seed, SeedStream::split));
  const Eigen::Index D = data.raw.features();
  const Eigen::Index target =
      config.downstream_target < 0 ? D - 1 : config.downstream_target;

  // The imputer is trained on the training split's inputs with MCAR gaps.
  const std::vector<TimeSeriesWindow> train_inputs = corrupt_windows(
      drop_feature(split.train, target), config.holdout_ratio,
      derive_seed(config.seed, SeedStream::corruption));
  const TrainState imputer = fit(config, train_inputs);

  std::vector<NamedImputer> imputers = {sting_imputer(
      imputer.model, inference_options_from(config),
      derive_seed(config.seed, SeedStream::inference))};
  for (NamedImputer &b :
       baseline_imputers(feature_means(train_inputs), config.knn_k))
    imputers.push_back(std::move(b));

  DownstreamOptions opt;
  opt.target = target;
  opt.ratios = config.downstream_ratios;
  opt.regressor.hidden = config.downstream_hidden;
  opt.regressor.dropout = config.downstream_dropout;
  opt.regressor.epochs = config.downstream_epochs;
  opt.regressor.lr = config.downstream_lr;
  opt.seed = derive_seed(config.seed, SeedStream::downstream);
  const DownstreamTable table = downstream_eval(split, imputers, opt);
  write_table(config, "downstream", downstream_table(table));
  return table;
}

std::vector<CurvePoint> cmd_curves(const ExperimentConfig &config) {
  config.validate();
  prepare_output(config);
  const Dataset data = load_dataset(config);
  std::vector<CurvePoint> points;
  for (double ratio : config.curve_ratios) {
    ExperimentConfig c = config;
    c.holdout_ratio = ratio;
    const std::vector<TimeSeriesWindow> windows = holdout_windows(data, c);
    const TrainState state = fit(c, windows);
    std::vector<NamedImputer> imputers = {
        sting_imputer(state.model, inference_options_from(c),
                      derive_seed(c.seed, SeedStream::inference))};
    for (NamedImputer &b : baseline_imputers(feature_means(windows), c.knn_k))
      imputers.push_back(std::move(b));
    for (const ScoreRow &r : score_imputers(windows, imputers))
      points.push_back({ratio, r.name, r.rmse});
  }
  Table t;
  t.columns = {"ratio", "imputer", "rmse"};
  for (const CurvePoint &p : points)
    t.rows.push_back(
        {format_number(p.ratio, 2), p.imputer, format_number(p.rmse, 6)});
  write_table(config, "curves", t);
  return points;
}

std::string cmd_gen_data(const ExperimentConfig &config,
                         const std::string &out_path, double missing_ratio) {
  config.validate();
  prepare_output(config);
  ExperimentConfig c = config;
  c.data_source = "synthetic";
  RawSeries raw = load_dataset(c).raw;
  if (missing_ratio > 0.0)
    raw = corrupt_mcar(raw, missing_ratio,
                       derive_seed(config.seed, SeedStream::corruption));
  const std::string path =
      out_path.empty() ? (fs::path(config.output_dir) / "data.csv").string()
                       : out_path;
  write_csv(path, raw);
  return path;
}

} // namespace sting
