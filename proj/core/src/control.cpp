#include "jaclab/control.hpp"

#include <stdexcept>

#include "jaclab/estimators.hpp"

namespace jaclab {

std::vector<double> control_step(const Mat& j, const std::vector<double>& x,
                                 const std::vector<double>& x_star,
                                 const ControllerConfig& cfg) {
  if (x.size() != j.rows() || x_star.size() != j.rows()) {
    throw std::invalid_argument("control_step: feature dim mismatch");
  }
  const Mat jp = pinv(j);
  std::vector<double> dq = jp.mul_vec(vec_sub(x_star, x));
  if (cfg.null_space_enabled) {
    std::vector<double> y = cfg.y;
    if (y.empty()) y.assign(j.cols(), 0.0);
    if (y.size() != j.cols()) {
      throw std::invalid_argument("control_step: null-space vector dim");
    }
    // (I - J+ J) y
    const std::vector<double> jy = j.mul_vec(y);
    const std::vector<double> pjy = jp.mul_vec(jy);
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] += y[i] - pjy[i];
  }
  for (double& v : dq) v *= cfg.lambda;
  return dq;
}

EvalTrace run_trajectory(Environment& env, JacobianEstimator& estimator,
                         const std::vector<double>& target,
                         const ControllerConfig& cfg) {
  if (cfg.max_steps < 1) {
    throw std::invalid_argument("run_trajectory: max_steps must be >= 1");
  }
  EvalTrace trace;
  trace.estimator = estimator.name();
  trace.target = target;

  env.reset(target);
  estimator.begin_trajectory(env);
  trace.initial_distance = distance_to_target(env.state());

  for (int t = 0; t < cfg.max_steps; ++t) {
    const EnvState s = env.state();
    Mat j_hat;
    try {
      j_hat = estimator.estimate(context_from_state(s));
    } catch (const std::exception& e) {
      trace.failure_reason = e.what();
      break;
    }
    const std::vector<double> cmd = control_step(j_hat, s.x, s.x_star, cfg);
    const EnvState s2 = env.step(cmd);
    estimator.observe_step(vec_sub(s2.q, s.q), vec_sub(s2.x, s.x));

    StepRecord rec;
    rec.distance = distance_to_target(s2);
    rec.j_hat = std::move(j_hat);
    rec.j_true = env.model().jacobian(s.q);
    rec.q = s.q;
    rec.x = s.x;
    trace.steps.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace jaclab
