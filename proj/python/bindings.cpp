// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sting/discriminator.hpp"
#include "sting/experiment.hpp"
#include "sting/synthetic.hpp"

namespace py = pybind11;
using namespace sting;

namespace {

ExperimentConfig make_config(const std::string &text,
                             const std::vector<std::string> &overrides) {
  ExperimentConfig c;
  std::istringstream in(text);
  apply_config_text(c, in, "<python>");
  for (const std::string &o : overrides)
    apply_override(c, o);
  return c;
}

py::dict series_dict(const RawSeries &s) {
  py::dict d;
  d["timestamps"] = s.timestamps;
  d["values"] = s.values;
  d["feature_names"] = s.feature_names;
  return d;
}

RawSeries series_from(const Matrix &values, const std::vector<double> &timestamps,
                      std::vector<std::string> names) {
  RawSeries s;
  s.values = values;
  s.timestamps = timestamps;
  if (names.empty())
    for (Eigen::Index d = 0; d < values.cols(); ++d)
      names.push_back("f" + std::to_string(d));
  s.feature_names = std::move(names);
  return s;
}

/// A trained checkpoint held in memory.
struct LoadedModel {
  Checkpoint ck;
  ExperimentConfig config;

  explicit LoadedModel(const std::string &path) : ck(load_checkpoint(path)) {
    std::istringstream in(ck.config_text);
    apply_config_text(config, in, path);
  }

  py::tuple impute(const Matrix &values, const std::vector<double> &timestamps,
                   bool search, std::uint64_t seed) const {
    RawSeries raw = series_from(values, timestamps, ck.feature_names);
    InferenceOptions o = inference_options_from(config);
    o.search = search;
    Rng rng(seed);
    const SeriesImputation r =
        impute_series(ck.state.model, ck.norm, raw, config.window_length, o, rng);
    return py::make_tuple(r.imputed.values, r.provenance);
  }
};

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-series imputation with bidirectional GRU generators and a "
            "hint-conditioned discriminator.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init(&make_config), py::arg("text") = "",
           py::arg("overrides") = std::vector<std::string>{},
           "Config from `key = value` text, then `key=value` overrides.")
      .def_static("from_file",
                  [](const std::string &path, const std::vector<std::string> &overrides) {
                    ExperimentConfig c;
                    apply_config_file(c, path);
                    for (const std::string &o : overrides)
                      apply_override(c, o);
                    return c;
                  },
                  py::arg("path"), py::arg("overrides") = std::vector<std::string>{})
      .def("set", [](ExperimentConfig &c, const std::string &a) { apply_override(c, a); })
      .def("validate", &ExperimentConfig::validate)
      .def("serialize", &ExperimentConfig::serialize)
      .def_static("keys", &config_keys);

  m.def("build_delta",
        [](const std::vector<double> &timestamps, const Matrix &mask) {
          return build_delta(timestamps, mask);
        },
        py::arg("timestamps"), py::arg("mask"));
  m.def("sample_hint",
        [](const Matrix &mask, double ratio, std::uint64_t seed) {
          return sample_hint(mask, ratio, seed);
        },
        py::arg("mask"), py::arg("ratio"), py::arg("seed"));
  m.def("gen_sinusoid_mix",
        [](Eigen::Index windows, Eigen::Index steps, Eigen::Index features,
           double noise_sd, std::uint64_t seed) {
          py::list out;
          for (const RawSeries &s :
               gen_sinusoid_mix(windows, steps, features, noise_sd, seed))
            out.append(series_dict(s));
          return out;
        },
        py::arg("windows"), py::arg("steps"), py::arg("features"),
        py::arg("noise_sd"), py::arg("seed"));
  m.def("load_csv", [](const std::string &path) { return series_dict(load_csv(path)); });

  m.def("train",
        [](const ExperimentConfig &c) {
          const TrainOutcome r = cmd_train(c);
          py::dict d;
          d["checkpoint"] = r.checkpoint;
          d["metrics"] = r.metrics;
          d["epochs"] = r.state.epoch;
          d["steps"] = r.state.step;
          return d;
        },
        py::arg("config"));
  m.def("evaluate",
        [](const ExperimentConfig &c, const std::string &checkpoint) {
          std::vector<std::pair<std::string, double>> out;
          for (const ScoreRow &r : cmd_evaluate(c, checkpoint))
            out.emplace_back(r.name, r.rmse);
          return out;
        },
        py::arg("config"), py::arg("checkpoint"));
  m.def("impute_csv",
        [](const ExperimentConfig &c, const std::string &checkpoint,
           const std::string &input) {
          const ImputeOutcome r = cmd_impute(c, checkpoint, input);
          py::dict d;
          d["imputed"] = r.imputed_csv;
          d["provenance"] = r.provenance_csv;
          d["generated_cells"] = r.generated_cells;
          d["out_of_range_cells"] = r.out_of_range_cells;
          return d;
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("input"));
  m.def("ablate",
        [](const ExperimentConfig &c) {
          py::list out;
          for (const AblationRow &r : cmd_ablate(c)) {
            py::dict d;
            d["variant"] = r.variant;
            d["rmse"] = r.rmse;
            d["increase_pct"] = r.increase_pct;
            d["checkpoint_hash"] = r.checkpoint_hash;
            out.append(d);
          }
          return out;
        },
        py::arg("config"));
  m.def("downstream",
        [](const ExperimentConfig &c) {
          const DownstreamTable t = cmd_downstream(c);
          py::dict d;
          d["rows"] = t.rows;
          d["ratios"] = t.ratios;
          d["rmse"] = t.rmse;
          return d;
        },
        py::arg("config"));

  py::class_<LoadedModel>(m, "Model")
      .def(py::init<const std::string &>(), py::arg("checkpoint"))
      .def_property_readonly("feature_names",
                             [](const LoadedModel &l) { return l.ck.feature_names; })
      .def_property_readonly("config", [](const LoadedModel &l) { return l.config; })
      .def("impute", &LoadedModel::impute, py::arg("values"),
           py::arg("timestamps"), py::arg("search") = true, py::arg("seed") = 0,
           "Fills NaN cells of a T x D array in original units. Returns the "
           "imputed array and a provenance array (1 = generated).");
}
