#pragma once

// Rotation tangent-space helpers. Convention used project-wide:
// orientations are unit quaternions, perturbed on the right (body frame),
// q' = q * exp(delta) with delta a 3-vector rotation increment.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rollopt {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

Matrix3d skew(const Vector3d& v);

// exp of a rotation vector (angle = |w|) as a unit quaternion.
Quaterniond quat_exp(const Vector3d& w);

// rotation vector of q, continuous branch (angle <= pi).
Vector3d quat_log(const Quaterniond& q);

// inverse of the right Jacobian of the SO(3) log map:
// Log(Exp(phi) Exp(d)) ~= phi + Jr_inv(phi) d.
Matrix3d right_jacobian_inv(const Vector3d& phi);

// body-frame retraction q * exp(delta), renormalized.
Quaterniond quat_retract(const Quaterniond& q, const Vector3d& delta);

// relative rotation angle between two quaternions, radians in [0, pi].
double quat_angle(const Quaterniond& a, const Quaterniond& b);

// World-frame angular velocity bridging q_t -> q_t1 over dt, with the
// derivative of omega*dt w.r.t. body-frame tangents of both endpoints.
struct AngularVelocity {
  Vector3d omega;       // = Log(R_t1 R_t^T) / dt
  Matrix3d dphi_dw_t;   // d(omega*dt)/d(tangent of q_t)   = -Jr_inv(phi) R_t
  Matrix3d dphi_dw_t1;  // d(omega*dt)/d(tangent of q_t1)  =  Jr_inv(phi) R_t
  double smooth_margin; // pi - angle; log branch kink at pi
};

AngularVelocity angular_velocity(const Quaterniond& q_t, const Quaterniond& q_t1,
                                 double dt);

}  // namespace rollopt
