#include "jaclab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jaclab {

EstimatorContext context_from_state(const EnvState& s) {
  return {s.q, s.x, s.x_star, s.q_dot};
}

BroydenState broyden_update(BroydenState state, const std::vector<double>& dq,
                            const std::vector<double>& de) {
  if (dq.size() != state.j_hat.cols() || de.size() != state.j_hat.rows()) {
    throw std::invalid_argument("broyden_update: dim mismatch");
  }
  const double nq2 = vec_dot(dq, dq);
  if (nq2 < state.gate) return state;
  const std::vector<double> residual =
      vec_sub(de, state.j_hat.mul_vec(dq));
  const double scale = state.alpha / nq2;
  for (std::size_t r = 0; r < state.j_hat.rows(); ++r) {
    const double sr = scale * residual[r];
    for (std::size_t c = 0; c < state.j_hat.cols(); ++c) {
      state.j_hat(r, c) += sr * dq[c];
    }
  }
  return state;
}

Mat broyden_init(Environment& env, double probe_angle) {
  if (std::abs(probe_angle) < 1e-12) {
    throw std::invalid_argument("broyden_init: degenerate probe angle");
  }
  const std::vector<double> q0 = env.q();
  const std::vector<double> x0 = env.state().x;
  Mat j(x0.size(), q0.size());
  for (std::size_t c = 0; c < q0.size(); ++c) {
    std::vector<double> qp = q0;
    qp[c] += probe_angle;
    env.set_joints(qp);
    const std::vector<double> xc = env.state().x;
    for (std::size_t r = 0; r < x0.size(); ++r) {
      j(r, c) = (xc[r] - x0[r]) / probe_angle;
    }
  }
  env.set_joints(q0);
  return j;
}

void BroydenEstimator::begin_trajectory(Environment& env) {
  state_.alpha = alpha_;
  state_.gate = gate_;
  state_.j_hat = broyden_init(env, probe_angle_);
  ready_ = true;
}

Mat BroydenEstimator::estimate(const EstimatorContext&) {
  if (!ready_) {
    throw std::logic_error("BroydenEstimator: begin_trajectory not called");
  }
  return state_.j_hat;
}

void BroydenEstimator::observe_step(const std::vector<double>& dq,
                                    const std::vector<double>& de) {
  if (!ready_) return;
  state_ = broyden_update(std::move(state_), dq, de);
}

Mat llknn_estimate(const Dataset& data, const std::vector<double>& q, int k) {
  const std::size_t n = data.samples.size();
  if (k < 1) throw std::invalid_argument("llknn_estimate: k must be >= 1");
  if (n <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("llknn_estimate: dataset too small for k");
  }
  if (q.size() != data.joint_dim()) {
    throw std::invalid_argument("llknn_estimate: query dim mismatch");
  }

  std::vector<std::pair<double, std::uint32_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const auto& qi = data.samples[i].q;
    for (std::size_t d = 0; d < q.size(); ++d) {
      const double diff = q[d] - qi[d];
      acc += diff * diff;
    }
    dist[i] = {acc, static_cast<std::uint32_t>(i)};
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  // Ordered-pair sums collapse to moment form:
  //   sum_{i != j} (a_i - a_j)(b_i - b_j)^T
  //     = 2k sum_i a_i b_i^T - 2 (sum a)(sum b)^T.
  const std::size_t xd = data.feature_dim();
  const std::size_t qd = data.joint_dim();
  Mat sxq(xd, qd), sqq(qd, qd);
  std::vector<double> sum_x(xd, 0.0), sum_q(qd, 0.0);
  for (int a = 0; a < k; ++a) {
    const auto& s = data.samples[dist[a].second];
    for (std::size_t r = 0; r < xd; ++r)
      for (std::size_t c = 0; c < qd; ++c) sxq(r, c) += s.x[r] * s.q[c];
    for (std::size_t r = 0; r < qd; ++r)
      for (std::size_t c = 0; c < qd; ++c) sqq(r, c) += s.q[r] * s.q[c];
    for (std::size_t r = 0; r < xd; ++r) sum_x[r] += s.x[r];
    for (std::size_t r = 0; r < qd; ++r) sum_q[r] += s.q[r];
  }
  const double kk = 2.0 * static_cast<double>(k);
  Mat gxq = kk * sxq - 2.0 * outer(sum_x, sum_q);
  Mat gqq = kk * sqq - 2.0 * outer(sum_q, sum_q);
  return gxq * pinv(gqq);
}

Mat neural_jacobian_estimate(const Mlp& model, InputEmbedding embedding,
                             const std::vector<double>& q,
                             std::size_t feature_dim) {
  if (model.spec.output_dim % feature_dim != 0) {
    throw std::invalid_argument(
        "neural_jacobian_estimate: output_dim not divisible by feature_dim");
  }
  const std::vector<double> y = forward(model, embed_input(embedding, q));
  return Mat(feature_dim, model.spec.output_dim / feature_dim, y);
}

Mat neural_kinematics_estimate(const Mlp& model, InputEmbedding embedding,
                               const std::vector<double>& q) {
  const Mat jn = input_jacobian(model, embed_input(embedding, q));
  if (embedding == InputEmbedding::RawAngles) return jn;
  // d f / d q_j = -sin(q_j) * d f / d cos_j + cos(q_j) * d f / d sin_j
  const std::size_t n = q.size();
  if (jn.cols() != 2 * n) {
    throw std::invalid_argument(
        "neural_kinematics_estimate: input_dim inconsistent with embedding");
  }
  Mat jq(jn.rows(), n);
  for (std::size_t c = 0; c < n; ++c) {
    const double cs = std::cos(q[c]);
    const double sn = std::sin(q[c]);
    for (std::size_t r = 0; r < jn.rows(); ++r) {
      jq(r, c) = -sn * jn(r, c) + cs * jn(r, n + c);
    }
  }
  return jq;
}

}  // namespace jaclab
