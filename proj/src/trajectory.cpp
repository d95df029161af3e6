#include "rollopt/trajectory.hpp"

namespace rollopt {

Trajectory apply_step(const Trajectory& traj, const TrajLayout& lay,
                      const ObjectModel& model, const Eigen::VectorXd& dir,
                      double alpha) {
  Trajectory out = traj;
  for (int t = 1; t <= lay.T; ++t) {
    State& s = out.states[t - 1];
    s.q += alpha * dir.segment(lay.q(t), lay.nq);
    s.o = model.retract(s.o, alpha * dir.segment(lay.z(t), lay.dof));
  }
  for (int t = 0; t < lay.T; ++t) {
    Action& a = out.actions[t];
    a.u += alpha * dir.segment(lay.u(t), lay.nq);
    for (int i = 0; i < lay.nf; ++i)
      a.f[i] += alpha * dir.segment<3>(lay.f(t, i));
    if (lay.env_force) a.f_e += alpha * dir.segment<3>(lay.fe(t));
  }
  return out;
}

void clamp_to_bounds(Trajectory& traj, const KinematicChain& chain, double f_max) {
  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  const Eigen::VectorXd ul = chain.action_limits();
  for (auto& s : traj.states) s.q = s.q.cwiseMax(lo).cwiseMin(hi);
  for (auto& a : traj.actions) {
    a.u = a.u.cwiseMax(-ul).cwiseMin(ul);
    for (auto& f : a.f)
      f = f.cwiseMax(Vector3d::Constant(-f_max)).cwiseMin(Vector3d::Constant(f_max));
    a.f_e = a.f_e.cwiseMax(Vector3d::Constant(-f_max)).cwiseMin(Vector3d::Constant(f_max));
  }
}

Eigen::VectorXd traj_difference(const Trajectory& a, const Trajectory& b,
                                const TrajLayout& lay, const ObjectModel& model) {
  Eigen::VectorXd d(lay.size());
  for (int t = 1; t <= lay.T; ++t) {
    d.segment(lay.q(t), lay.nq) = b.states[t - 1].q - a.states[t - 1].q;
    d.segment(lay.z(t), lay.dof) =
        model.difference(a.states[t - 1].o, b.states[t - 1].o);
  }
  for (int t = 0; t < lay.T; ++t) {
    d.segment(lay.u(t), lay.nq) = b.actions[t].u - a.actions[t].u;
    for (int i = 0; i < lay.nf; ++i)
      d.segment<3>(lay.f(t, i)) = b.actions[t].f[i] - a.actions[t].f[i];
    if (lay.env_force) d.segment<3>(lay.fe(t)) = b.actions[t].f_e - a.actions[t].f_e;
  }
  return d;
}

double objective(const Trajectory& traj, const State& s0, const Pose& goal,
                 const CostWeights& w, const ObjectModel& model,
                 const TrajLayout& lay, Eigen::VectorXd* grad) {
  if (grad) grad->setZero(lay.size());
  double J = 0;

  // goal attraction
  for (int t = 1; t <= lay.T; ++t) {
    const double wt = (t == lay.T) ? w.terminal : 1.0;
    const Pose& o = traj.states[t - 1].o;
    const Vector3d dx = o.p - goal.p;
    const Vector3d e = quat_log(goal.q.conjugate() * o.q);
    J += wt * (w.goal_pos * dx.squaredNorm() + w.goal_rot * e.squaredNorm());
    if (grad) {
      Eigen::Matrix<double, 6, 1> g6;
      // d|e|^2/dw = 2e for body-right perturbations: Jr_inv(e)^T e = e
      g6 << 2 * wt * w.goal_pos * dx, 2 * wt * w.goal_rot * e;
      grad->segment(lay.z(t), lay.dof) += model.tangent_basis(o).transpose() * g6;
    }
  }

  // smoothness between consecutive states, s_0 included
  for (int t = 1; t <= lay.T; ++t) {
    const State& a = (t == 1) ? s0 : traj.states[t - 2];
    const State& b = traj.states[t - 1];
    const Eigen::VectorXd dq = b.q - a.q;
    const Vector3d dx = b.o.p - a.o.p;
    const Vector3d e = quat_log(a.o.q.conjugate() * b.o.q);
    J += w.smooth_q * dq.squaredNorm() + w.smooth_pos * dx.squaredNorm() +
         w.smooth_rot * e.squaredNorm();
    if (!grad) continue;
    grad->segment(lay.q(t), lay.nq) += 2 * w.smooth_q * dq;
    Eigen::Matrix<double, 6, 1> g6;
    g6 << 2 * w.smooth_pos * dx, 2 * w.smooth_rot * e;
    grad->segment(lay.z(t), lay.dof) += model.tangent_basis(b.o).transpose() * g6;
    if (t > 1) {
      grad->segment(lay.q(t - 1), lay.nq) -= 2 * w.smooth_q * dq;
      g6 << 2 * w.smooth_pos * dx, 2 * w.smooth_rot * e;
      grad->segment(lay.z(t - 1), lay.dof) -=
          model.tangent_basis(a.o).transpose() * g6;
    }
  }
  return J;
}

}  // namespace rollopt
