// Exploration-driven data collection, dataset persistence, and k-NN
// finite-difference pair precomputation for the hyperplane objectives.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jaclab/environments.hpp"
#include "jaclab/rng.hpp"

namespace jaclab {

// Mean-reverting exploration noise; theta and sigma are per-control-step
// quantities (one process step per command).
struct OuConfig {
  double sigma = 1.00;
  double mu = 0.00;
  double theta = 0.15;
};

// x <- x + theta * (mu - x) + sigma * xi, xi ~ N(0, 1) per component.
std::vector<double> ou_step(const std::vector<double>& state,
                            const OuConfig& cfg, Rng& rng);

enum class CollectionPolicy {
  OuExploration,
  // Commands from the exact-Jacobian controller toward a per-trajectory
  // random target; with probability 0.05 per step the command gets N(0, 0.1)
  // noise added to every joint.
  PerturbedTrueController,
};

std::string to_string(CollectionPolicy p);
CollectionPolicy collection_policy_from_string(const std::string& s);

struct DatasetSample {
  std::uint32_t trajectory = 0;
  std::uint32_t step = 0;
  std::vector<double> q;
  std::vector<double> x;
};

struct Dataset {
  EnvKind kind = EnvKind::SinglePoint7;
  std::vector<DatasetSample> samples;

  // collection metadata
  std::uint64_t seed = 0;
  OuConfig ou;
  std::uint32_t n_trajectories = 0;
  std::uint32_t trajectory_length = 0;
  CollectionPolicy policy = CollectionPolicy::OuExploration;

  std::size_t joint_dim() const { return env_joint_dim(kind); }
  std::size_t feature_dim() const { return env_feature_dim(kind); }
};

// Rolls n_traj trajectories of traj_len steps each, recording (q, x) before
// every command. Every trajectory resets the environment to its initial pose
// and derives an independent RNG stream from (seed, trajectory index).
Dataset collect(Environment& env, int n_traj, int traj_len,
                const OuConfig& ou, std::uint64_t seed,
                CollectionPolicy policy = CollectionPolicy::OuExploration);

struct FiniteDiffPair {
  std::vector<double> dx;
  std::vector<double> dq;
};

// One training anchor: a joint configuration, its k nearest dataset
// neighbors (joint-space Euclidean, self excluded), and all ordered
// neighbor-pair finite differences (k(k-1) of them).
struct PairAnchor {
  std::vector<double> q;
  std::vector<std::uint32_t> neighbors;
  std::vector<FiniteDiffPair> pairs;
};

struct PairSet {
  EnvKind kind = EnvKind::SinglePoint7;
  int k = 10;
  std::vector<PairAnchor> anchors;
};

// Exact brute-force k-NN per sample; ties broken by lower sample index.
PairSet build_pairs(const Dataset& data, int k);

// Versioned binary format (magic "NJDS"); round-trips bit-exactly.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// Inspection export: header traj,step,q1..qn,x1..xm.
void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace jaclab
