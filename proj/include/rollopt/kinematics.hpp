#pragma once

// Serial revolute chains: several independent fingers on a common base.
// Forward kinematics, point Jacobians, the exact derivative terms of point
// Jacobians w.r.t. joint angles, and gravity torques.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rollopt/geometry.hpp"

namespace rollopt {

struct Joint {
  std::string name;
  Pose origin;                 // fixed transform, parent link -> joint frame
  Vector3d axis{0, 0, 1};      // unit, in the joint frame
  double lower{-3.14}, upper{3.14};
  double action_limit{0.3};    // |u| bound per step, rad
};

struct LinkInertia {
  double mass{0};
  Vector3d com{Vector3d::Zero()};  // in the link frame
};

struct Finger {
  std::string name;
  Pose origin;  // base -> finger root
  std::vector<Joint> joints;
  std::vector<LinkInertia> links;  // one per joint (the link it moves)
  std::string tip_mesh;            // OBJ path, relative to the chain file
  Pose tip_offset;                 // mesh pose in the last link frame
};

struct KinematicChain {
  Pose base;
  std::vector<Finger> fingers;

  int nq() const;
  int finger_offset(int finger) const;  // first joint index of a finger
  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  Eigen::VectorXd action_limits() const;
};

struct FingerFk {
  std::vector<Pose> link_pose;       // per joint, post-rotation
  std::vector<Vector3d> axis_w;      // joint axis, world
  std::vector<Vector3d> origin_w;    // joint origin, world
};

std::vector<FingerFk> forward_kinematics(const KinematicChain& chain,
                                         const Eigen::VectorXd& q);

// 3 x n_joints(finger) Jacobian of a world point rigidly attached to
// `link` of the finger (columns for joints beyond `link` are zero).
Eigen::Matrix3Xd point_jacobian(const FingerFk& fk, int link, const Vector3d& p_world);

// Exact derivative terms of a revolute-chain point Jacobian. For column
// vectors z_k (axes), J_k (Jacobian columns of point p):
//   dJ_k/dq_l = z_l x J_k (l <= k),  z_k x J_l (l > k, l on the path).
// d(J v)/dq, as a 3 x n matrix.
Eigen::Matrix3Xd point_jacobian_dot_v(const FingerFk& fk, int link, const Vector3d& p_world,
                                      const Eigen::VectorXd& v);
// d(J^T f)/dq, as an n x n matrix.
Eigen::MatrixXd point_jacobian_T_f_dq(const FingerFk& fk, int link, const Vector3d& p_world,
                                      const Vector3d& f);

// Joint torque counteracting gravity: tau = dU/dq with U = sum m g z_com,
// i.e. sum_links J_com^T (0, 0, 9.8 m). Matches the potential-energy
// finite-difference oracle by construction.
Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q,
                               const std::vector<FingerFk>& fk);
// d tau_g / dq (exact).
Eigen::MatrixXd gravity_torque_dq(const KinematicChain& chain, const Eigen::VectorXd& q,
                                  const std::vector<FingerFk>& fk);

// Chain description files are JSON; see configs/hands/*.json. Mesh paths
// are resolved relative to the chain file's directory.
KinematicChain load_chain_file(const std::string& path);

}  // namespace rollopt
