#pragma once

// Trajectory decision variables and the smooth objective.
//
// A trajectory holds the decision states s_1..s_T and actions u_0..u_{T-1};
// the current state s_0 is owned by the caller. Solver steps live in a flat
// tangent vector whose layout is fixed by TrajLayout: object poses move
// through the object model's reduced coordinates, so updates never leave the
// joint manifold.

#include <vector>

#include <Eigen/Dense>

#include "rollopt/kinematics.hpp"
#include "rollopt/object_model.hpp"

namespace rollopt {

struct State {
  Eigen::VectorXd q;
  Pose o;
};

struct Action {
  Eigen::VectorXd u;               // commanded joint delta
  std::vector<Vector3d> f;         // finger forces on the object, world frame
  Vector3d f_e{Vector3d::Zero()};  // environment force (when modeled)
};

struct Trajectory {
  std::vector<State> states;    // s_1..s_T
  std::vector<Action> actions;  // u_0..u_{T-1}
  int horizon() const { return static_cast<int>(states.size()); }
};

// Flat tangent layout: all state blocks (dq, dz) for t=1..T, then all action
// blocks (du, df_1..df_nf[, df_e]) for t=0..T-1.
struct TrajLayout {
  int T{0}, nq{0}, dof{6}, nf{0};
  bool env_force{false};

  int state_dim() const { return nq + dof; }
  int action_dim() const { return nq + 3 * nf + (env_force ? 3 : 0); }
  int size() const { return T * (state_dim() + action_dim()); }

  // t is 1-based for states (matching s_t), 0-based for actions.
  int q(int t) const { return (t - 1) * state_dim(); }
  int z(int t) const { return (t - 1) * state_dim() + nq; }
  int u(int t) const { return T * state_dim() + t * action_dim(); }
  int f(int t, int i) const { return u(t) + nq + 3 * i; }
  int fe(int t) const { return u(t) + nq + 3 * nf; }
};

// traj advanced by alpha * dir: vector-space blocks add, object poses
// retract through the model.
Trajectory apply_step(const Trajectory& traj, const TrajLayout& lay,
                      const ObjectModel& model, const Eigen::VectorXd& dir,
                      double alpha);

// Clamp q to joint limits, u to action limits, forces to the f_max box.
void clamp_to_bounds(Trajectory& traj, const KinematicChain& chain, double f_max);

// Layout-sized tangent d with apply_step(a, lay, model, d, 1) == b (object
// blocks through the model's on-manifold difference).
Eigen::VectorXd traj_difference(const Trajectory& a, const Trajectory& b,
                                const TrajLayout& lay, const ObjectModel& model);

struct CostWeights {
  double goal_pos{100.0};   // m^-2
  double goal_rot{1.0};     // rad^-2
  double terminal{10.0};    // extra multiplier on the t = T goal term
  double smooth_q{1.0};     // rad^-2
  double smooth_pos{100.0}; // m^-2
  double smooth_rot{1.0};   // rad^-2
};

// J_goal + J_smooth. J_goal sums w_t (goal_pos |x_t - x_g|^2 +
// goal_rot angle(theta_t, theta_g)^2) with w_t = 1 except terminal at t = T;
// J_smooth sums the weighted squared state difference, s_0 included. If
// grad is non-null it receives the layout-sized analytic gradient (object
// blocks reduced through the model tangent basis).
double objective(const Trajectory& traj, const State& s0, const Pose& goal,
                 const CostWeights& w, const ObjectModel& model,
                 const TrajLayout& lay, Eigen::VectorXd* grad);

}  // namespace rollopt
