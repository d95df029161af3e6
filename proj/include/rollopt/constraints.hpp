#pragma once

// Constraint families tying a manipulation step together: finger-object
// contact, pure rolling at the contacts, joint torque balance under a PD
// command model, object wrench balance, linearized friction, minimum force,
// object-environment contact, a contact-region limit, and the
// fixed-fingertip tracking variant used as an ablation baseline.
//
// Each evaluation reports the residual with dense Jacobian blocks against
// the variables of one transition (q_t, o_t, u_t, f, q_{t+1}, o_{t+1}).
// An empty (0x0) block means the family does not touch that variable.
// Inequalities use the g <= 0 feasible convention. Passing with_grads =
// false fills the residual only and accepts Values-level estimates.

#include <vector>

#include <Eigen/Dense>

#include "rollopt/contact.hpp"
#include "rollopt/object_model.hpp"

namespace rollopt {

struct ConstraintEval {
  Eigen::VectorXd r;
  bool equality{true};
  Eigen::MatrixXd dq_t;              // r.size() x nq
  Eigen::MatrixXd do_t;              // r.size() x 6 (world dx, body dtheta)
  Eigen::MatrixXd du_t;              // r.size() x nq
  Eigen::MatrixXd dq_t1;             // r.size() x nq
  Eigen::MatrixXd do_t1;             // r.size() x 6
  std::vector<Eigen::MatrixXd> df;   // per finger, r.size() x 3
  Eigen::MatrixXd dfe;               // r.size() x 3
};

// Orthonormal rows spanning the plane orthogonal to unit n. Picks the world
// axis least aligned with n (ties broken x, y, z), projects it, completes
// with the cross product. Throws std::invalid_argument on a zero normal.
Eigen::Matrix<double, 2, 3> tangent_basis_2d(const Vector3d& n);

// Finger-object distance equality, 1 row (meters). `off` places the finger's
// joint block inside the stacked robot configuration of size nq.
ConstraintEval contact_constraint(const ContactEstimate& est, int nq, int off,
                                  bool with_grads = true);

// Pure rolling at one contact, 2 rows (m/s): the finger contact velocity
// projected to the tangent plane must match the object surface velocity
//   R(n) (J_c (q_{t+1}-q_t)/dt - omega x r - xdot) = 0,  r = c - x_t.
// R(n) and the contact frame are treated as locally constant; the q_t block
// differentiates the softmin weights only unless exact_q_block is set.
ConstraintEval rolling_constraint(const ContactEstimate& est, int nq, int off,
                                  const Eigen::VectorXd& q_t, const Eigen::VectorXd& q_t1,
                                  const Pose& o_t, const Pose& o_t1, double dt,
                                  bool exact_q_block = false, bool with_grads = true);

// Joint torque balance under the PD command model, nq rows (N m):
//   Kp (q_{t+1} - q_t - u) - tau_g(q_t) + sum_i Jc_i^T f_i = 0.
ConstraintEval torque_balance(const KinematicChain& chain,
                              const std::vector<FingerFk>& fk,
                              const std::vector<ContactEstimate>& est,
                              const Eigen::VectorXd& q_t, const Eigen::VectorXd& q_t1,
                              const Eigen::VectorXd& u, const std::vector<Vector3d>& f,
                              const Eigen::VectorXd& kp, bool with_grads = true);

// World contact point of the external (environment) force with its pose
// gradients, produced from an environment contact estimate.
struct EnvArm {
  Vector3d c{Vector3d::Zero()};
  Matrix3d dc_dx{Matrix3d::Zero()};
  Matrix3d dc_dw{Matrix3d::Zero()};
};

// Quasi-static object wrench balance projected by the joint model.
// Free objects: 6 rows,
//   sum f_i + f_e - m g = 0                      (g = (0,0,9.8), support form)
//   sum f_i x r_i + f_e x r_e - m r_com(R_{t+1}) x g = 0,   r_* = c_* - x_t.
// Revolute/spherical objects: net torque about the joint anchor along the
// unconstrained directions (1 or 3 rows); the pivot absorbs everything else.
// env_arm may be null only while f_e is exactly zero.
ConstraintEval wrench_balance(const std::vector<ContactEstimate>& est, int nq,
                              const std::vector<int>& off,
                              const std::vector<Vector3d>& f, const Vector3d& f_e,
                              const EnvArm* env_arm, double mass,
                              const Vector3d& com_body, const Pose& o_t,
                              const Pose& o_t1, const ObjectModel& model,
                              bool with_grads = true);

// Four-sided friction pyramid plus force positivity, 5 rows (N). This
// overload treats the contact frame as a fixed parameter: force gradients
// only.
ConstraintEval friction_cone(const Vector3d& f, const Vector3d& n, double mu,
                             int finger, int n_fingers, bool with_grads = true);

// Same rows evaluated at a contact estimate; additionally differentiates the
// frame's rotation with the softmin normal, so the q_t and o_t blocks are
// exact.
ConstraintEval friction_cone(const ContactEstimate& est, int nq, int off,
                             const Vector3d& f, double mu, int finger,
                             int n_fingers, bool with_grads = true);

// Force magnitude floor, 1 row (N): f_min - sqrt(|f|^2 + eps^2) <= 0.
ConstraintEval min_force(const Vector3d& f, double f_min, int finger, int n_fingers,
                         bool with_grads = true);

// Object-environment distance equality from the env estimate, 1 row (m).
ConstraintEval env_contact_constraint(const EnvContactEstimate& est,
                                      bool with_grads = true);

// Keep a finger's contact point within h of a body-frame anchor mapped
// through o_t, 1 inequality row (m), smoothed norm.
ConstraintEval region_constraint(const ContactEstimate& est, int nq, int off,
                                 const Pose& o, const Vector3d& anchor_body, double h,
                                 bool with_grads = true);

// Ablation baseline: pin the fingertip to a body-frame point recorded at
// episode start, 3 equality rows (m).
ConstraintEval tracking_constraint(const FingerFk& fk, const Finger& finger,
                                   int nq, int off, const Pose& o,
                                   const Vector3d& p_hat_body, bool with_grads = true);

}  // namespace rollopt
