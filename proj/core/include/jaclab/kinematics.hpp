// DH-chain forward kinematics, tracked-point feature maps, the analytic
// 2-link planar arm, and exact geometric Jacobians.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "jaclab/linalg.hpp"

namespace jaclab {

// One DH row; theta_offset is added to the joint variable (the "+pi" rows).
struct DhRow {
  double alpha = 0.0;         // radians
  double a = 0.0;             // meters
  double d = 0.0;             // meters
  double theta_offset = 0.0;  // radians
};

// Ordered DH rows; non-actuated rows (e.g. the fixed base row) use q = 0.
struct DhChain {
  std::vector<DhRow> rows;
  std::vector<bool> actuated;

  std::size_t joint_count() const;
};

// The 7-DOF arm whose DH table drives both simulators.
DhChain kinova_chain();

// Planar embedding of the same chain as a pure DH chain (two a-only rows);
// used to cross-check the geometric Jacobian against the closed form.
DhChain planar_chain_as_dh(double l1, double l2);

struct PlanarArm2 {
  double l1 = 0.3143;  // meters
  double l2 = 0.1774;  // meters
};

// Homogeneous points in the end-effector frame whose world positions are the
// environment features. Last component of every point is 1.
struct PointSet {
  std::vector<std::array<double, 4>> points;

  static PointSet single();       // {(0,0,0,1)}
  static PointSet multi();        // end-effector plus 0.1-scaled frame axes
  std::size_t count() const { return points.size(); }
};

// Homogeneous transform for one DH row at joint value q (theta = q + offset):
//   [ cos t  -cos(a)sin t   sin(a)sin t   a cos t ]
//   [ sin t   cos(a)cos t  -sin(a)cos t   a sin t ]
//   [ 0       sin a         cos a         d       ]
//   [ 0       0             0             1       ]
Mat dh_transform(const DhRow& row, double q);

// Product of all row transforms, base to end-effector. q supplies the
// actuated rows in order; fixed rows contribute q = 0.
Mat forward_kinematics(const DhChain& chain, const std::vector<double>& q);

// Cartesian parts of T(q) * p for each tracked point, concatenated.
std::vector<double> point_features(const DhChain& chain,
                                   const std::vector<double>& q,
                                   const PointSet& pts);

// Exact position Jacobian of every tracked point (3|pts| x n): the column
// for actuated row j and world point p is z_j x (p - o_j) with z_j, o_j the
// axis and origin of the frame the joint rotates about.
Mat true_jacobian(const DhChain& chain, const std::vector<double>& q,
                  const PointSet& pts);

// (L1 c1 + L2 c12, L1 s1 + L2 s12)
std::vector<double> planar_fk(const PlanarArm2& arm, double q1, double q2);

// [ -L1 s1 - L2 s12   -L2 s12 ]
// [  L1 c1 + L2 c12    L2 c12 ]
Mat planar_jacobian(const PlanarArm2& arm, double q1, double q2);

}  // namespace jaclab
