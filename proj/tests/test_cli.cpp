// Exercises the installed command-line surface end to end: subcommands,
// flags, exit codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kBinary = JACLAB_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kBinary + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("cli pipeline: collect, train, eval, analyze") {
  TempDir dir("jaclab_cli_smoke");
  const std::string cfg_path = dir.str() + "/config.json";
  {
    std::ofstream f(cfg_path);
    f << R"({
      "env": "planar2",
      "seeds": [0],
      "collection": {"n_trajectories": 3, "trajectory_length": 40},
      "training": {
        "nk": {"type": "neural_kinematics", "activation": "tanh",
                "hidden_layers": 1, "hidden_width": 8, "epochs": 1}
      },
      "evaluation": {
        "targets_per_seed": 2,
        "estimators": ["true", "nk"],
        "controller": {"max_steps": 10}
      }
    })";
  }
  const std::string common = "--config " + cfg_path + " --out " + dir.str();

  CHECK(run("collect " + common + " --csv") == 0);
  CHECK(fs::exists(dir.path / "datasets/dataset_seed0.njds"));
  CHECK(fs::exists(dir.path / "datasets/dataset_seed0.csv"));

  CHECK(run("train " + common + " --estimator nk") == 0);
  CHECK(fs::exists(dir.path / "models/nk_seed0.njlm"));
  // Overwrite refused without --force (runtime failure, exit 2).
  CHECK(run("train " + common + " --estimator nk") == 2);
  CHECK(run("train " + common + " --estimator nk --force") == 0);
  // Unknown estimator is a configuration error (exit 1).
  CHECK(run("train " + common + " --estimator ghost") == 1);

  CHECK(run("eval " + common + " --jobs 2") == 0);
  CHECK(fs::exists(dir.path / "results/trajectories.csv"));
  CHECK(fs::exists(dir.path / "results/steps.csv"));
  CHECK(fs::exists(dir.path / "results/summary.csv"));

  CHECK(run("analyze --out " + dir.str()) == 0);
  CHECK(fs::exists(dir.path / "analysis/pd_partition.csv"));
}

TEST_CASE("cli exit codes for bad input") {
  TempDir dir("jaclab_cli_errors");
  const std::string bad_cfg = dir.str() + "/bad.json";
  {
    std::ofstream f(bad_cfg);
    f << R"({"env": "planar2", "surprise": true})";
  }
  CHECK(run("collect --config " + bad_cfg + " --out " + dir.str()) == 1);

  // Missing results directory for analyze: runtime failure.
  CHECK(run("analyze --out " + dir.str() + "/nowhere") == 2);

  // Missing config flag entirely.
  CHECK(run("eval --out " + dir.str()) == 1);
}
