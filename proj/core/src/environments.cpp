#include "jaclab/environments.hpp"

#include <cmath>
#include <stdexcept>

namespace jaclab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::SinglePoint7: return "single_point_7dof";
    case EnvKind::MultiPoint7: return "multi_point_7dof";
    case EnvKind::Planar2: return "planar2";
  }
  throw std::logic_error("to_string(EnvKind): bad value");
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "single_point_7dof") return EnvKind::SinglePoint7;
  if (s == "multi_point_7dof") return EnvKind::MultiPoint7;
  if (s == "planar2") return EnvKind::Planar2;
  throw std::invalid_argument("unknown environment kind: " + s);
}

std::size_t env_feature_dim(EnvKind kind) {
  switch (kind) {
    case EnvKind::SinglePoint7: return 3;
    case EnvKind::MultiPoint7: return 12;
    case EnvKind::Planar2: return 2;
  }
  throw std::logic_error("env_feature_dim: bad kind");
}

std::size_t env_joint_dim(EnvKind kind) {
  return kind == EnvKind::Planar2 ? 2 : 7;
}

EnvModel EnvModel::make(EnvKind kind) {
  return make_with_chain(kind, kinova_chain());
}

EnvModel EnvModel::make_with_chain(EnvKind kind, DhChain chain) {
  EnvModel m;
  m.kind = kind;
  switch (kind) {
    case EnvKind::SinglePoint7:
      m.chain = std::move(chain);
      m.points = PointSet::single();
      break;
    case EnvKind::MultiPoint7:
      m.chain = std::move(chain);
      m.points = PointSet::multi();
      break;
    case EnvKind::Planar2:
      break;  // analytic arm, chain unused
  }
  if (kind != EnvKind::Planar2 && m.chain.joint_count() != 7) {
    throw std::invalid_argument("EnvModel: chain must expose 7 joints");
  }
  return m;
}

std::vector<double> EnvModel::features(const std::vector<double>& q) const {
  if (q.size() != joint_dim()) {
    throw std::invalid_argument("EnvModel::features: joint dim mismatch");
  }
  if (kind == EnvKind::Planar2) return planar_fk(arm, q[0], q[1]);
  return point_features(chain, q, points);
}

Mat EnvModel::jacobian(const std::vector<double>& q) const {
  if (q.size() != joint_dim()) {
    throw std::invalid_argument("EnvModel::jacobian: joint dim mismatch");
  }
  if (kind == EnvKind::Planar2) return planar_jacobian(arm, q[0], q[1]);
  return true_jacobian(chain, q, points);
}

std::pair<double, double> EnvModel::target_joint_bounds(
    std::size_t joint) const {
  if (kind == EnvKind::Planar2) {
    return joint == 0 ? std::pair{-2.0, 2.0} : std::pair{-1.5, 1.5};
  }
  return {-kPi, kPi};
}

std::vector<double> EnvState::packed() const {
  std::vector<double> s;
  s.reserve(x.size() * 2 + cos_q.size() * 3);
  s.insert(s.end(), x.begin(), x.end());
  s.insert(s.end(), cos_q.begin(), cos_q.end());
  s.insert(s.end(), sin_q.begin(), sin_q.end());
  s.insert(s.end(), q_dot.begin(), q_dot.end());
  s.insert(s.end(), x_star.begin(), x_star.end());
  return s;
}

Environment::Environment(EnvModel model, SimConfig cfg)
    : model_(std::move(model)), config_(std::move(cfg)) {
  if (config_.dt <= 0.0) throw std::invalid_argument("Environment: dt <= 0");
  if (config_.initial_q.empty()) {
    config_.initial_q.assign(model_.joint_dim(), 0.0);
  }
  if (config_.initial_q.size() != model_.joint_dim()) {
    throw std::invalid_argument("Environment: initial_q dim mismatch");
  }
  q_ = config_.initial_q;
  q_dot_.assign(model_.joint_dim(), 0.0);
  x_ = model_.features(q_);
  x_star_ = x_;
}

EnvState Environment::reset(const std::vector<double>& target) {
  if (target.size() != model_.feature_dim()) {
    throw std::invalid_argument("Environment::reset: target dim mismatch");
  }
  q_ = config_.initial_q;
  q_dot_.assign(model_.joint_dim(), 0.0);
  x_ = model_.features(q_);
  x_star_ = target;
  return state();
}

EnvState Environment::step(const std::vector<double>& q_dot) {
  if (q_dot.size() != model_.joint_dim()) {
    throw std::invalid_argument("Environment::step: command dim mismatch");
  }
  for (double v : q_dot) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Environment::step: non-finite command");
    }
  }
  for (std::size_t i = 0; i < q_.size(); ++i) {
    q_[i] += config_.dt * q_dot[i];
  }
  q_dot_ = q_dot;
  x_ = model_.features(q_);
  return state();
}

void Environment::set_joints(const std::vector<double>& q) {
  if (q.size() != model_.joint_dim()) {
    throw std::invalid_argument("Environment::set_joints: dim mismatch");
  }
  q_ = q;
  x_ = model_.features(q_);
}

EnvState Environment::state() const {
  EnvState s;
  s.kind = model_.kind;
  s.x = x_;
  s.q = q_;
  s.cos_q.resize(q_.size());
  s.sin_q.resize(q_.size());
  for (std::size_t i = 0; i < q_.size(); ++i) {
    s.cos_q[i] = std::cos(q_[i]);
    s.sin_q[i] = std::sin(q_[i]);
  }
  s.q_dot = q_dot_;
  s.x_star = x_star_;
  return s;
}

std::vector<double> Environment::sample_target(Rng& rng) const {
  std::vector<double> q(model_.joint_dim());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto [lo, hi] = model_.target_joint_bounds(i);
    q[i] = rng.uniform(lo, hi);
  }
  return model_.features(q);
}

double feature_distance(EnvKind kind, const std::vector<double>& x,
                        const std::vector<double>& x_star) {
  if (x.size() != x_star.size()) {
    throw std::invalid_argument("feature_distance: dim mismatch");
  }
  if (kind == EnvKind::MultiPoint7) {
    double total = 0.0;
    for (std::size_t p = 0; p < 4; ++p) {
      double acc = 0.0;
      for (std::size_t i = 3 * p; i < 3 * p + 3; ++i) {
        const double d = x[i] - x_star[i];
        acc += d * d;
      }
      total += std::sqrt(acc);
    }
    return total;
  }
  return vec_norm(vec_sub(x, x_star));
}

double distance_to_target(const EnvState& state) {
  return feature_distance(state.kind, state.x, state.x_star);
}

}  // namespace jaclab
