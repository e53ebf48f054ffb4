// Inverse-Jacobian Cartesian set-point controller and the fixed-length
// trajectory evaluation loop.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jaclab/environments.hpp"
#include "jaclab/linalg.hpp"

namespace jaclab {

class JacobianEstimator;

struct ControllerConfig {
  double lambda = 1.0;
  int max_steps = 200;
  bool null_space_enabled = false;
  std::vector<double> y;  // null-space vector; empty means zero
};

// dq = lambda * [ J+ (x* - x) + (I - J+ J) y ], the second term only when
// null_space_enabled. The result is sent as a joint velocity command.
std::vector<double> control_step(const Mat& j, const std::vector<double>& x,
                                 const std::vector<double>& x_star,
                                 const ControllerConfig& cfg);

// Per-step record at decision time: the estimate (and the exact Jacobian at
// the same configuration) plus the distance after the step was applied.
struct StepRecord {
  double distance = 0.0;  // after applying this step's command
  Mat j_hat;
  Mat j_true;
  std::vector<double> q;  // configuration the Jacobians were evaluated at
  std::vector<double> x;
};

struct EvalTrace {
  std::string estimator;
  std::uint64_t seed = 0;
  int target_id = 0;
  std::vector<double> target;
  double initial_distance = 0.0;
  std::vector<StepRecord> steps;
  std::string failure_reason;  // nonempty if the estimator aborted the run

  double final_distance() const {
    return steps.empty() ? initial_distance : steps.back().distance;
  }
};

// Resets the environment to the target, runs exactly cfg.max_steps control
// steps (no early stopping; traces stay fixed-length for aggregation), and
// feeds (dq, dx) back to stateful estimators after every step. Estimator
// exceptions abort the trajectory with the reason recorded.
EvalTrace run_trajectory(Environment& env, JacobianEstimator& estimator,
                         const std::vector<double>& target,
                         const ControllerConfig& cfg);

}  // namespace jaclab
