// Kinematic simulators: single-point 7-DOF, multi-point 7-DOF, and the
// 2-link planar arm. Euler integration q <- q + dt * q_dot, no joint limits.
#pragma once

#include <string>
#include <vector>

#include "jaclab/kinematics.hpp"
#include "jaclab/linalg.hpp"
#include "jaclab/rng.hpp"

namespace jaclab {

enum class EnvKind { SinglePoint7, MultiPoint7, Planar2 };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

// Feature-space and joint-space dimensions fixed per kind:
// (3,7) single, (12,7) multi, (2,2) planar.
std::size_t env_feature_dim(EnvKind kind);
std::size_t env_joint_dim(EnvKind kind);

// The kinematic map behind an environment: features(q) and the exact
// Jacobian d features / d q. Immutable and freely shareable.
struct EnvModel {
  EnvKind kind = EnvKind::SinglePoint7;
  DhChain chain;       // 7-DOF kinds
  PointSet points;     // tracked points for the 7-DOF kinds
  PlanarArm2 arm;      // planar kind

  static EnvModel make(EnvKind kind);
  // Same kind but a caller-supplied chain (loaded from config).
  static EnvModel make_with_chain(EnvKind kind, DhChain chain);

  std::size_t joint_dim() const { return env_joint_dim(kind); }
  std::size_t feature_dim() const { return env_feature_dim(kind); }

  std::vector<double> features(const std::vector<double>& q) const;
  Mat jacobian(const std::vector<double>& q) const;

  // Per-joint bounds used when sampling target configurations.
  std::pair<double, double> target_joint_bounds(std::size_t joint) const;
};

// Observation snapshot. packed() lays out (x, cos q, sin q, q_dot, x*),
// giving lengths 27 / 45 / 10 by kind. Raw q rides along for estimators and
// is not part of the packed state.
struct EnvState {
  EnvKind kind = EnvKind::SinglePoint7;
  std::vector<double> x;
  std::vector<double> cos_q;
  std::vector<double> sin_q;
  std::vector<double> q_dot;
  std::vector<double> x_star;
  std::vector<double> q;

  std::vector<double> packed() const;
};

struct SimConfig {
  double dt = 0.05;               // seconds
  int episode_len = 100;          // informational; stepping is caller-driven
  std::vector<double> initial_q;  // empty = zero vector
};

class Environment {
 public:
  Environment(EnvModel model, SimConfig cfg);

  const EnvModel& model() const { return model_; }
  const SimConfig& config() const { return config_; }

  // q = initial_q, q_dot = 0, x recomputed, x_star = target.
  EnvState reset(const std::vector<double>& target);

  // q <- q + dt * q_dot; the command is stored verbatim, no clamping.
  EnvState step(const std::vector<double>& q_dot);

  // Teleports the joints (used by probe-based estimator initialization).
  void set_joints(const std::vector<double>& q);

  EnvState state() const;
  const std::vector<double>& q() const { return q_; }

  // Uniform joint configuration inside target_joint_bounds mapped through
  // the kinematics.
  std::vector<double> sample_target(Rng& rng) const;

 private:
  EnvModel model_;
  SimConfig config_;
  std::vector<double> q_;
  std::vector<double> q_dot_;
  std::vector<double> x_;
  std::vector<double> x_star_;
};

// Euclidean distance to target; for the multi-point kind, the sum of the
// four per-point distances.
double distance_to_target(const EnvState& state);
double feature_distance(EnvKind kind, const std::vector<double>& x,
                        const std::vector<double>& x_star);

}  // namespace jaclab
