// jaclab command-line front end: collect | train | eval | analyze | demo.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.
#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "jaclab/experiment.hpp"

namespace {

jaclab::ExperimentConfig load_or_fail(const std::string& config_path) {
  if (config_path.empty()) {
    throw jaclab::ConfigError("--config is required for this command");
  }
  return jaclab::load_config(config_path);
}

std::string resolve_out(const jaclab::ExperimentConfig& cfg,
                        const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  throw jaclab::ConfigError("no output directory: pass --out or set out_dir");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven Jacobian estimation and Cartesian control lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string estimator_name;
  int jobs = 1;
  bool force = false;
  bool export_csv = false;
  std::optional<std::uint64_t> seed_override;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) cmd->add_option("--config", config_path, "config JSON");
    cmd->add_option("--out", out_dir, "experiment output directory");
    cmd->add_option("--seed-override", seed_override,
                    "run only this seed instead of the configured list");
  };

  CLI::App* collect = app.add_subcommand("collect", "collect a dataset");
  add_common(collect, true);
  collect->add_flag("--csv", export_csv, "also export the dataset as CSV");

  CLI::App* train = app.add_subcommand("train", "train one estimator");
  add_common(train, true);
  train->add_option("--estimator", estimator_name, "training entry name")
      ->required();
  train->add_flag("--force", force, "overwrite an existing model file");

  CLI::App* eval = app.add_subcommand("eval", "run control evaluation");
  add_common(eval, true);
  eval->add_option("--jobs", jobs, "parallel trajectory workers");

  CLI::App* analyze = app.add_subcommand("analyze", "analyze eval results");
  analyze->add_option("--out", out_dir, "experiment output directory")
      ->required();

  CLI::App* demo = app.add_subcommand(
      "demo", "planar end-to-end pipeline at smoke scale");
  demo->add_option("--out", out_dir, "experiment output directory")->required();
  demo->add_option("--jobs", jobs, "parallel trajectory workers");

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed()) {
      const auto cfg = load_or_fail(config_path);
      jaclab::run_collect(cfg, resolve_out(cfg, out_dir), seed_override,
                          export_csv);
    } else if (train->parsed()) {
      const auto cfg = load_or_fail(config_path);
      jaclab::run_train(cfg, resolve_out(cfg, out_dir), estimator_name, force,
                        seed_override);
    } else if (eval->parsed()) {
      const auto cfg = load_or_fail(config_path);
      jaclab::run_eval(cfg, resolve_out(cfg, out_dir), jobs, seed_override);
    } else if (analyze->parsed()) {
      jaclab::run_analyze(out_dir);
    } else if (demo->parsed()) {
      jaclab::run_demo(out_dir, jobs);
    }
  } catch (const jaclab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
