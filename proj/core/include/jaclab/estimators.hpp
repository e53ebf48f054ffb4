// The five Jacobian estimators behind one interface: exact (true), Broyden
// rank-one tracking, local-linear k-NN least squares, and the two neural
// estimators (direct Jacobian prediction and differentiated kinematics).
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "jaclab/collection.hpp"
#include "jaclab/environments.hpp"
#include "jaclab/linalg.hpp"
#include "jaclab/neural.hpp"

namespace jaclab {

// Everything an estimator may read at a control step.
struct EstimatorContext {
  std::vector<double> q;
  std::vector<double> x;
  std::vector<double> x_star;
  std::vector<double> q_dot;
};

EstimatorContext context_from_state(const EnvState& s);

class JacobianEstimator {
 public:
  virtual ~JacobianEstimator() = default;
  virtual std::string name() const = 0;
  // Called once per trajectory before control begins; probe-based
  // estimators (Broyden) run their initialization movements here.
  virtual void begin_trajectory(Environment& env) { (void)env; }
  virtual Mat estimate(const EstimatorContext& ctx) = 0;
  // Post-step feedback: dq = change in joints, de = change in measured
  // features. Only stateful estimators care.
  virtual void observe_step(const std::vector<double>& dq,
                            const std::vector<double>& de) {
    (void)dq;
    (void)de;
  }
};

class TrueJacobianEstimator final : public JacobianEstimator {
 public:
  explicit TrueJacobianEstimator(EnvModel model) : model_(std::move(model)) {}
  std::string name() const override { return "true"; }
  Mat estimate(const EstimatorContext& ctx) override {
    return model_.jacobian(ctx.q);
  }

 private:
  EnvModel model_;
};

struct BroydenState {
  Mat j_hat;
  double alpha = 0.1;
  double gate = 0.01;  // minimum |dq|^2 for an update to apply
};

// J <- J + alpha * (de - J dq) dq^T / |dq|^2 when |dq|^2 >= gate, else
// unchanged.
BroydenState broyden_update(BroydenState state, const std::vector<double>& dq,
                            const std::vector<double>& de);

// Finite-difference initialization: moves each joint by probe_angle from the
// current pose, measuring every column against the same base features, then
// restores the pose.
Mat broyden_init(Environment& env, double probe_angle = 0.1);

class BroydenEstimator final : public JacobianEstimator {
 public:
  BroydenEstimator(double alpha = 0.1, double gate = 0.01,
                   double probe_angle = 0.1)
      : alpha_(alpha), gate_(gate), probe_angle_(probe_angle) {}
  std::string name() const override { return "broyden"; }
  void begin_trajectory(Environment& env) override;
  Mat estimate(const EstimatorContext& ctx) override;
  void observe_step(const std::vector<double>& dq,
                    const std::vector<double>& de) override;
  const BroydenState& state() const { return state_; }

 private:
  double alpha_, gate_, probe_angle_;
  BroydenState state_;
  bool ready_ = false;
};

// Least-squares hyperplane fit over the ordered finite-difference pairs of
// the k nearest dataset neighbors of q:
//   J = (sum dx dq^T) (sum dq dq^T)+.
// Rank-deficient neighborhoods survive via the pseudo-inverse (degenerate
// case: the zero matrix).
Mat llknn_estimate(const Dataset& data, const std::vector<double>& q, int k);

class LlknnEstimator final : public JacobianEstimator {
 public:
  LlknnEstimator(std::shared_ptr<const Dataset> data, int k)
      : data_(std::move(data)), k_(k) {}
  std::string name() const override { return "llknn"; }
  Mat estimate(const EstimatorContext& ctx) override {
    return llknn_estimate(*data_, ctx.q, k_);
  }

 private:
  std::shared_ptr<const Dataset> data_;
  int k_;
};

// Network output reshaped row-major to (feature_dim x joint_dim).
Mat neural_jacobian_estimate(const Mlp& model, InputEmbedding embedding,
                             const std::vector<double>& q,
                             std::size_t feature_dim);

// Input Jacobian of the kinematics network composed with the embedding
// chain rule so the result is d x / d q in joint space.
Mat neural_kinematics_estimate(const Mlp& model, InputEmbedding embedding,
                               const std::vector<double>& q);

class NeuralJacobianEstimator final : public JacobianEstimator {
 public:
  NeuralJacobianEstimator(std::string name, Mlp model, InputEmbedding embedding,
                          std::size_t feature_dim)
      : name_(std::move(name)),
        model_(std::move(model)),
        embedding_(embedding),
        feature_dim_(feature_dim) {}
  std::string name() const override { return name_; }
  Mat estimate(const EstimatorContext& ctx) override {
    return neural_jacobian_estimate(model_, embedding_, ctx.q, feature_dim_);
  }

 private:
  std::string name_;
  Mlp model_;
  InputEmbedding embedding_;
  std::size_t feature_dim_;
};

class NeuralKinematicsEstimator final : public JacobianEstimator {
 public:
  NeuralKinematicsEstimator(std::string name, Mlp model,
                            InputEmbedding embedding)
      : name_(std::move(name)), model_(std::move(model)), embedding_(embedding) {}
  std::string name() const override { return name_; }
  Mat estimate(const EstimatorContext& ctx) override {
    return neural_kinematics_estimate(model_, embedding_, ctx.q);
  }

 private:
  std::string name_;
  Mlp model_;
  InputEmbedding embedding_;
};

}  // namespace jaclab
