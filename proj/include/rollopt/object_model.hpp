#pragma once

// Joint models restricting how a manipulated object can move. The solver
// stores full poses per knot but steps them through reduced coordinates, so a
// hinged valve stays exactly on its hinge no matter what the gradients say.
//
// Tangent convention everywhere: (dx world, dtheta body-frame right
// perturbation), stacked position first.

#include <Eigen/Dense>

#include "rollopt/geometry.hpp"

namespace rollopt {

enum class JointType { Free, Revolute, Spherical };

struct ObjectModel {
  JointType type{JointType::Free};
  Vector3d axis{Vector3d::UnitZ()};       // revolute: world axis, unit
  Vector3d anchor{Vector3d::Zero()};      // revolute/spherical: world point
  Vector3d body_point{Vector3d::Zero()};  // spherical: pinned point, body frame

  int dof() const;

  // 6 x dof basis mapping reduced velocities to the pose tangent.
  Eigen::MatrixXd tangent_basis(const Pose& o) const;

  // Move along reduced coordinates without leaving the joint manifold.
  Pose retract(const Pose& o, const Eigen::VectorXd& dz) const;

  // Reduced displacement z with retract(a, z) == b for on-manifold poses.
  Eigen::VectorXd difference(const Pose& a, const Pose& b) const;

  // On-manifold interpolation, s in [0, 1] from a to b.
  Pose interpolate(const Pose& a, const Pose& b, double s) const;

  // Rows of the object wrench (force, torque about the world origin) that
  // the joint cannot react; the balance residual is wrench_projection() * W.
  // Free: identity (6). Revolute: axis torque about the anchor (1).
  // Spherical: torque about the anchor, forces absorbed by the pivot (3).
  Eigen::MatrixXd wrench_projection() const;
};

}  // namespace rollopt
