#pragma once

// Softmin-weighted contact estimation between sampled surfaces and SDFs.
//
// Per finger i with sampled surface points p_j(q) and object SDF phi(., o):
//   h_j  = exp(-delta phi_j) / sum_k exp(-delta phi_k)
//   Phi  = sum_j h_j phi_j          (estimated contact distance)
//   c    = sum_j h_j p_j            (estimated contact point)
//   J_c  = sum_j h_j J_{p_j}        (estimated contact Jacobian)
//   n    = normalize(sum_j h_j dphi/dp_j)
// together with analytic derivatives w.r.t. the joint angles and the object
// pose tangent. The same machinery runs object-samples-against-environment
// for environment contacts.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rollopt/kinematics.hpp"
#include "rollopt/mesh.hpp"

namespace rollopt {

// Simplex weights of the smooth minimum; max-shifted for overflow safety.
Eigen::VectorXd softmin_weights(const Eigen::VectorXd& distances, double delta);

// Weighted distance sum h_j d_j; lies in [min d, min d + log(N)/delta].
double softmin_value(const Eigen::VectorXd& distances, double delta);

struct SampledFinger {
  int link{0};                    // owning link index within the finger
  std::vector<Vector3d> points;   // in that link's frame
};

struct SampledBody {
  std::vector<SampledFinger> fingers;
};

// Area-uniform fingertip samples from each finger's tip mesh, mapped through
// tip_offset into the last link frame. Deterministic in (chain, n, seed).
SampledBody sample_fingertips(const KinematicChain& chain, int n_per_finger,
                              uint64_t seed);

enum class EstimateLevel { Values, Gradients };

class ContactEstimate {
 public:
  double Phi{0};
  Vector3d c{Vector3d::Zero()};
  Vector3d n{Vector3d::UnitZ()};
  Eigen::Matrix3Xd Jc;  // 3 x n_joints(finger)

  double smooth_margin{1e30};
  bool nonsmooth{false};

  // derivatives w.r.t. finger joints (columns) and the object pose tangent
  Eigen::VectorXd dPhi_dq;
  Vector3d dPhi_dx{Vector3d::Zero()}, dPhi_dw{Vector3d::Zero()};
  Eigen::Matrix3Xd dc_dq;
  Matrix3d dc_dx{Matrix3d::Zero()}, dc_dw{Matrix3d::Zero()};
  Eigen::Matrix3Xd dn_dq;
  Matrix3d dn_dx{Matrix3d::Zero()}, dn_dw{Matrix3d::Zero()};

  // Second-order contractions for constraint Jacobians. The q-derivative of
  // J_c v defaults to the weight-differentiation approximation; `exact`
  // additionally differentiates the per-point Jacobians themselves.
  Eigen::Matrix3Xd dJcv_dq(const Eigen::VectorXd& v, bool exact) const;
  Matrix3d dJcv_dx(const Eigen::VectorXd& v) const;
  Matrix3d dJcv_dw(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dJcTf_dq(const Vector3d& f) const;  // always exact
  Eigen::MatrixXd dJcTf_dx(const Vector3d& f) const;  // n_joints x 3
  Eigen::MatrixXd dJcTf_dw(const Vector3d& f) const;

  // retained per-point state (Gradients level only)
  Eigen::VectorXd h;
  Eigen::MatrixXd pts_w;    // 3 x N
  Eigen::MatrixXd g_w;      // 3 x N, world sdf gradients
  Eigen::MatrixXd Jpts;     // 3N x n_joints, stacked point Jacobians
  Eigen::MatrixXd dh_dq;    // n_joints x N
  Eigen::MatrixXd dh_dx;    // 3 x N
  Eigen::MatrixXd dh_dw;    // 3 x N
  std::vector<Vector3d> axis_w, origin_w;  // finger joint frames at q
  int link{0};
};

ContactEstimate contact_estimate(const FingerFk& fk, int n_joints,
                                 const SampledFinger& body, const SdfScene& scene,
                                 const Pose& o, double delta, EstimateLevel level);

// Object surface samples (body frame) against a static environment scene.
struct EnvContactEstimate {
  double Phi{0};
  Vector3d c{Vector3d::Zero()};
  Vector3d n{Vector3d::UnitZ()};
  double smooth_margin{1e30};
  bool nonsmooth{false};

  Vector3d dPhi_dx{Vector3d::Zero()}, dPhi_dw{Vector3d::Zero()};
  Matrix3d dc_dx{Matrix3d::Zero()}, dc_dw{Matrix3d::Zero()};
  Matrix3d dn_dx{Matrix3d::Zero()}, dn_dw{Matrix3d::Zero()};
};

EnvContactEstimate env_contact_estimate(const std::vector<Vector3d>& object_points,
                                        const Pose& o, const SdfScene& env,
                                        double delta, EstimateLevel level);

}  // namespace rollopt
