// Experiment configuration and the reproducible pipeline behind the CLI:
// collect -> train -> eval -> analyze. Every command is a pure function of
// (config, input files); reruns produce byte-identical outputs.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jaclab/collection.hpp"
#include "jaclab/control.hpp"
#include "jaclab/environments.hpp"
#include "jaclab/estimators.hpp"
#include "jaclab/metrics.hpp"
#include "jaclab/neural.hpp"

namespace jaclab {

// Configuration problems exit with code 1; runtime failures with code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingEntry {
  std::string name;  // estimator id used in files and result rows
  std::string type;  // "neural_kinematics" | "neural_jacobian"
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 100;
  Activation activation = Activation::Relu;
  InputEmbedding embedding = InputEmbedding::TrigCosSin;
  TrainConfig train;   // seed is filled with the run seed
  double beta = 0.0;   // neural_jacobian only
  int k = 10;          // neural_jacobian neighborhood
};

struct CollectionConfig {
  int n_trajectories = 100;
  int trajectory_length = 100;
  OuConfig ou;
  CollectionPolicy policy = CollectionPolicy::OuExploration;
};

struct BroydenConfig {
  double alpha = 0.1;
  double gate = 0.01;
  double probe_angle = 0.1;
};

struct EvaluationConfig {
  int targets_per_seed = 110;
  ControllerConfig controller;
  ThresholdSpec thresholds;
  BucketSpec buckets;
  std::vector<std::string> estimators;
  int llknn_k = 128;
  BroydenConfig broyden;
};

struct ExperimentConfig {
  EnvKind env = EnvKind::SinglePoint7;
  std::vector<std::uint64_t> seeds;
  SimConfig sim;
  std::optional<DhChain> dh_chain;  // overrides the built-in chain
  CollectionConfig collection;
  std::vector<TrainingEntry> training;
  EvaluationConfig evaluation;
  std::string out_dir;  // optional; the --out flag takes precedence

  const TrainingEntry* find_training(const std::string& name) const;
  EnvModel make_model() const;
  Environment make_env() const;
};

// Paper-protocol defaults for each environment kind (dataset sizes, network
// shapes, epochs, weight decay, thresholds, buckets).
ExperimentConfig default_config(EnvKind kind);

// Strict JSON parsing: unknown keys anywhere are errors. Values omitted fall
// back to the environment defaults above.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical file layout inside an experiment directory.
struct ExperimentPaths {
  std::string root;

  std::string datasets_dir() const { return root + "/datasets"; }
  std::string models_dir() const { return root + "/models"; }
  std::string results_dir() const { return root + "/results"; }
  std::string analysis_dir() const { return root + "/analysis"; }

  std::string dataset(std::uint64_t seed) const;
  std::string dataset_csv(std::uint64_t seed) const;
  std::string model(const std::string& name, std::uint64_t seed) const;
  std::string train_log(const std::string& name, std::uint64_t seed) const;
  std::string trajectories_csv() const { return results_dir() + "/trajectories.csv"; }
  std::string steps_csv() const { return results_dir() + "/steps.csv"; }
  std::string summary_csv() const { return results_dir() + "/summary.csv"; }
  std::string bucket_counts_csv() const { return results_dir() + "/bucket_counts.csv"; }
};

void run_collect(const ExperimentConfig& cfg, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override = {},
                 bool export_csv = false);

void run_train(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& estimator_name, bool force = false,
               std::optional<std::uint64_t> seed_override = {});

void run_eval(const ExperimentConfig& cfg, const std::string& out_dir,
              int jobs = 1, std::optional<std::uint64_t> seed_override = {});

// Consumes results/ CSVs and writes analysis/ CSVs (Frobenius over time,
// condition-number distributions with natural-log values, PD partition).
void run_analyze(const std::string& out_dir);

// Smoke-scale planar pipeline in one invocation: collect 10k samples, train
// a 1x100 tanh kinematics net, evaluate 50 targets, analyze.
ExperimentConfig demo_config();
void run_demo(const std::string& out_dir, int jobs = 1);

}  // namespace jaclab
