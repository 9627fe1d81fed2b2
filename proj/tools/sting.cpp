// SPDX-License-Identifier: Apache-2.0
/**
 * @file   sting.cpp
 * @brief  Command-line entry point.
 *
 * Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
 */
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sting/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
};

sting::ExperimentConfig resolve(const CommonArgs &args) {
  sting::ExperimentConfig config;
  if (!args.config_file.empty())
    sting::apply_config_file(config, args.config_file);
  for (const std::string &o : args.overrides)
    sting::apply_override(config, o);
  config.validate();
  return config;
}

void add_common(CLI::App *cmd, CommonArgs &args) {
  cmd->add_option("-c,--config", args.config_file, "Config file (key = value)");
  cmd->add_option("-s,--set", args.overrides,
                  "Override a config key (key=value); repeatable")
      ->allow_extra_args(false);
}

void print_table(const sting::Table &t) { std::cout << t.to_text(); }

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multivariate time-series imputation with a bidirectional "
               "attention GRU GAN"};
  app.require_subcommand(1);

  CommonArgs args;
  bool resume = false;
  std::string checkpoint, input, out_path;
  double missing = 0.0;

  auto *train = app.add_subcommand("train", "Train and write checkpoint + metrics");
  add_common(train, args);
  train->add_flag("--resume", resume,
                  "Continue from the checkpoint in output.dir if present");

  auto *impute = app.add_subcommand("impute", "Impute a CSV with a checkpoint");
  add_common(impute, args);
  impute->add_option("--checkpoint", checkpoint,
                     "Checkpoint file (default: <output.dir>/checkpoint.bin)");
  impute->add_option("-i,--input", input, "CSV to impute")->required();

  auto *evaluate = app.add_subcommand("evaluate", "Held-out RMSE of STING and baselines");
  add_common(evaluate, args);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file");

  auto *ablate = app.add_subcommand("ablate", "Ablation table");
  add_common(ablate, args);

  auto *downstream = app.add_subcommand("downstream", "Downstream regression table");
  add_common(downstream, args);

  auto *curves = app.add_subcommand("curves", "RMSE per missing ratio");
  add_common(curves, args);

  auto *gen = app.add_subcommand("gen-data", "Write the synthetic dataset as CSV");
  add_common(gen, args);
  gen->add_option("-o,--out", out_path, "Output CSV (default: <output.dir>/data.csv)");
  gen->add_option("--missing", missing, "MCAR missing ratio to apply")
      ->check(CLI::Range(0.0, 0.999999));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  sting::ExperimentConfig config;
  try {
    config = resolve(args);
  } catch (const sting::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (checkpoint.empty())
      checkpoint = sting::checkpoint_path(config);
    if (train->parsed()) {
      const auto out = sting::cmd_train(config, resume);
      std::cout << "epochs " << out.state.epoch << ", steps " << out.state.step
                << "\ncheckpoint " << out.checkpoint << "\nmetrics "
                << out.metrics << "\n";
    } else if (impute->parsed()) {
      const auto out = sting::cmd_impute(config, checkpoint, input);
      std::cout << "imputed " << out.imputed_csv << "\nprovenance "
                << out.provenance_csv << "\ngenerated cells "
                << out.generated_cells << " (" << out.out_of_range_cells
                << " outside the training range)\n";
    } else if (evaluate->parsed()) {
      print_table(sting::score_table(sting::cmd_evaluate(config, checkpoint)));
    } else if (ablate->parsed()) {
      print_table(sting::ablation_table(sting::cmd_ablate(config)));
    } else if (downstream->parsed()) {
      print_table(sting::downstream_table(sting::cmd_downstream(config)));
    } else if (curves->parsed()) {
      const auto points = sting::cmd_curves(config);
      sting::Table t;
      t.columns = {"ratio", "imputer", "rmse"};
      for (const auto &p : points)
        t.rows.push_back({sting::format_number(p.ratio, 2), p.imputer,
                          sting::format_number(p.rmse, 6)});
      print_table(t);
    } else if (gen->parsed()) {
      std::cout << sting::cmd_gen_data(config, out_path, missing) << "\n";
    }
  } catch (const sting::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
