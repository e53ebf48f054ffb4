#include "jaclab/kinematics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace jaclab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::size_t DhChain::joint_count() const {
  std::size_t n = 0;
  for (bool f : actuated) n += f ? 1 : 0;
  return n;
}

DhChain kinova_chain() {
  DhChain c;
  c.rows = {
      {kPi, 0.0, 0.0, 0.0},                    // fixed base row
      {kPi / 2, 0.0, -(0.1564 + 0.1284), 0.0},
      {kPi / 2, 0.0, -(0.0054 + 0.0064), kPi},
      {kPi / 2, 0.0, -(0.2104 + 0.2104), kPi},
      {kPi / 2, 0.0, -(0.0064 + 0.0064), kPi},
      {kPi / 2, 0.0, -(0.2084 + 0.1059), kPi},
      {kPi / 2, 0.0, 0.0, kPi},
      {kPi, 0.0, -(0.1059 + 0.0615), kPi},
  };
  c.actuated = {false, true, true, true, true, true, true, true};
  return c;
}

DhChain planar_chain_as_dh(double l1, double l2) {
  DhChain c;
  c.rows = {{0.0, l1, 0.0, 0.0}, {0.0, l2, 0.0, 0.0}};
  c.actuated = {true, true};
  return c;
}

PointSet PointSet::single() {
  PointSet p;
  p.points = {{0.0, 0.0, 0.0, 1.0}};
  return p;
}

PointSet PointSet::multi() {
  PointSet p;
  p.points = {{0.0, 0.0, 0.0, 1.0},
              {0.1, 0.0, 0.0, 1.0},
              {0.0, 0.1, 0.0, 1.0},
              {0.0, 0.0, 0.1, 1.0}};
  return p;
}

Mat dh_transform(const DhRow& row, double q) {
  const double t = q + row.theta_offset;
  const double ct = std::cos(t), st = std::sin(t);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Mat m(4, 4);
  m(0, 0) = ct;
  m(0, 1) = -ca * st;
  m(0, 2) = sa * st;
  m(0, 3) = row.a * ct;
  m(1, 0) = st;
  m(1, 1) = ca * ct;
  m(1, 2) = -sa * ct;
  m(1, 3) = row.a * st;
  m(2, 1) = sa;
  m(2, 2) = ca;
  m(2, 3) = row.d;
  m(3, 3) = 1.0;
  return m;
}

Mat forward_kinematics(const DhChain& chain, const std::vector<double>& q) {
  if (q.size() != chain.joint_count()) {
    throw std::invalid_argument("forward_kinematics: joint count mismatch");
  }
  Mat t = Mat::identity(4);
  std::size_t qi = 0;
  for (std::size_t i = 0; i < chain.rows.size(); ++i) {
    const double qv = chain.actuated[i] ? q[qi++] : 0.0;
    t = t * dh_transform(chain.rows[i], qv);
  }
  return t;
}

std::vector<double> point_features(const DhChain& chain,
                                   const std::vector<double>& q,
                                   const PointSet& pts) {
  const Mat t = forward_kinematics(chain, q);
  std::vector<double> out;
  out.reserve(3 * pts.count());
  for (const auto& p : pts.points) {
    for (std::size_t r = 0; r < 3; ++r) {
      out.push_back(t(r, 0) * p[0] + t(r, 1) * p[1] + t(r, 2) * p[2] +
                    t(r, 3) * p[3]);
    }
  }
  return out;
}

Mat true_jacobian(const DhChain& chain, const std::vector<double>& q,
                  const PointSet& pts) {
  if (q.size() != chain.joint_count()) {
    throw std::invalid_argument("true_jacobian: joint count mismatch");
  }
  const std::size_t n = chain.joint_count();

  // One pass collecting, for each actuated row, the axis and origin of the
  // frame the joint variable rotates about (the frame before that row).
  std::vector<std::array<double, 3>> axes(n), origins(n);
  Mat t = Mat::identity(4);
  std::size_t qi = 0;
  for (std::size_t i = 0; i < chain.rows.size(); ++i) {
    if (chain.actuated[i]) {
      axes[qi] = {t(0, 2), t(1, 2), t(2, 2)};
      origins[qi] = {t(0, 3), t(1, 3), t(2, 3)};
    }
    const double qv = chain.actuated[i] ? q[qi] : 0.0;
    if (chain.actuated[i]) ++qi;
    t = t * dh_transform(chain.rows[i], qv);
  }

  Mat j(3 * pts.count(), n);
  for (std::size_t pi = 0; pi < pts.count(); ++pi) {
    const auto& p = pts.points[pi];
    std::array<double, 3> pw{};
    for (std::size_t r = 0; r < 3; ++r) {
      pw[r] = t(r, 0) * p[0] + t(r, 1) * p[1] + t(r, 2) * p[2] + t(r, 3) * p[3];
    }
    for (std::size_t c = 0; c < n; ++c) {
      const auto& z = axes[c];
      const std::array<double, 3> r{pw[0] - origins[c][0],
                                    pw[1] - origins[c][1],
                                    pw[2] - origins[c][2]};
      j(3 * pi + 0, c) = z[1] * r[2] - z[2] * r[1];
      j(3 * pi + 1, c) = z[2] * r[0] - z[0] * r[2];
      j(3 * pi + 2, c) = z[0] * r[1] - z[1] * r[0];
    }
  }
  return j;
}

std::vector<double> planar_fk(const PlanarArm2& arm, double q1, double q2) {
  return {arm.l1 * std::cos(q1) + arm.l2 * std::cos(q1 + q2),
          arm.l1 * std::sin(q1) + arm.l2 * std::sin(q1 + q2)};
}

Mat planar_jacobian(const PlanarArm2& arm, double q1, double q2) {
  const double s1 = std::sin(q1), c1 = std::cos(q1);
  const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
  Mat j(2, 2);
  j(0, 0) = -arm.l1 * s1 - arm.l2 * s12;
  j(0, 1) = -arm.l2 * s12;
  j(1, 0) = arm.l1 * c1 + arm.l2 * c12;
  j(1, 1) = arm.l2 * c12;
  return j;
}

}  // namespace jaclab
