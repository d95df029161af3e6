#pragma once

// Assembly of one manipulation episode into a constrained trajectory
// optimization: which constraint families are active, how their residuals
// stack, and how their Jacobian blocks scatter into the flat tangent layout.
//
// Instances are enumerated family-major in a fixed order, so multiplier
// vectors and per-family residual slices are stable across evaluations.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rollopt/constraints.hpp"
#include "rollopt/trajectory.hpp"

namespace rollopt {

enum class Family {
  Contact = 0,
  Rolling,
  TorqueBalance,
  WrenchBalance,
  Friction,
  MinForce,
  EnvContact,
  Region,
  Tracking,
};
inline constexpr int kFamilyCount = 9;
const char* family_name(Family f);

// Keeps one finger's estimated contact point within `radius` of a point
// anchored to the object.
struct RegionSpec {
  int finger{0};
  Vector3d anchor_body{Vector3d::Zero()};
  double radius{0.02};
};

struct ProblemSpec {
  KinematicChain chain;
  SampledBody body;   // finger surface samples driving contact estimation
  SdfScene object;    // manipulated object, body frame
  ObjectModel model;
  double mass{0.1};
  Vector3d com_body{Vector3d::Zero()};
  Eigen::VectorXd kp;  // per-joint PD gain, size nq

  double delta{400.0};  // softmin sharpness
  double mu{0.5};
  double f_min{0.1};
  double f_max{10.0};
  double dt{0.1};
  int T{10};
  Pose goal;
  CostWeights weights;
  double init_sigma_u{2.5e-2};
  double init_sigma_f{0.5};

  bool contact{true}, rolling{true}, balance{true}, friction{true},
      min_force{true};
  bool rolling_exact_q{false};
  // reach-contact mode: contact equalities only at t = T
  bool contact_terminal_only{false};

  // ablation: replace the geometric contact/rolling families with fixed
  // object-frame fingertip targets
  bool tracking{false};
  std::vector<Vector3d> track_anchor;  // per finger, object frame

  // object-environment interaction; enables the f_e decision variable
  bool env_contact{false};
  SdfScene env;                      // world frame
  std::vector<Vector3d> env_points;  // object-frame surface samples
  std::optional<RegionSpec> region;

  int nf() const { return static_cast<int>(chain.fingers.size()); }
  TrajLayout layout() const;
};

struct ConstraintInstance {
  Family family;
  int t;        // transition index (0..T-1) or state index (1..T), see anchor
  int finger;   // -1 for per-step families
  bool eq;
  int size;
  int offset;   // row offset in the stacked equality/inequality vector
};

// Per-state evaluation cache: forward kinematics and contact estimates.
struct StepCache {
  std::vector<FingerFk> fk;
  std::vector<ContactEstimate> est;
  EnvContactEstimate env;
};

class Problem {
 public:
  Problem(ProblemSpec spec, State s0);

  const ProblemSpec& spec() const { return spec_; }
  const State& s0() const { return s0_; }
  const TrajLayout& layout() const { return lay_; }
  const std::vector<ConstraintInstance>& equalities() const { return eq_; }
  const std::vector<ConstraintInstance>& inequalities() const { return ineq_; }
  int n_eq() const { return n_eq_; }
  int n_ineq() const { return n_ineq_; }

  StepCache step_cache(const State& s, EstimateLevel level) const;

  // Residuals only (cheap path for line search and audits).
  void residuals(const Trajectory& traj, Eigen::VectorXd& c,
                 Eigen::VectorXd& g) const;

  // Residuals plus the vector-Jacobian products: grad += dc^T y_eq +
  // dg^T y_ineq, sized by the layout. Used for augmented-Lagrangian
  // gradients without materializing the Jacobian.
  void eval(const Trajectory& traj, Eigen::VectorXd& c, Eigen::VectorXd& g,
            const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
            Eigen::VectorXd& grad) const;

  // Full blocks of a single instance at the given trajectory (gradient
  // audits); recomputes the caches it needs.
  ConstraintEval eval_instance(const ConstraintInstance& inst,
                               const Trajectory& traj) const;

  // max |residual| per family from stacked residual vectors
  std::array<double, kFamilyCount> family_residuals(
      const Eigen::VectorXd& c, const Eigen::VectorXd& g) const;

  double cost(const Trajectory& traj, Eigen::VectorXd* grad) const;

  // Seeded start: cumulative normal joint deltas, normal forces, on-manifold
  // object interpolation from s0 to the goal.
  Trajectory init_trajectory(uint64_t seed) const;

 private:
  // anchor state index whose cache an instance reads (transition families
  // anchor at t, state families at their own t)
  int anchor(const ConstraintInstance& inst) const;
  ConstraintEval build(const ConstraintInstance& inst, const Trajectory& traj,
                       const std::vector<StepCache>& caches, bool grads) const;
  const State& state_at(const Trajectory& traj, int t) const;

  ProblemSpec spec_;
  State s0_;
  TrajLayout lay_;
  std::vector<ConstraintInstance> eq_, ineq_;
  int n_eq_{0}, n_ineq_{0};
};

}  // namespace rollopt
