#include "rollopt/problem.hpp"

#include <random>
#include <stdexcept>

namespace rollopt {

const char* family_name(Family f) {
  switch (f) {
    case Family::Contact: return "contact";
    case Family::Rolling: return "rolling";
    case Family::TorqueBalance: return "torque_balance";
    case Family::WrenchBalance: return "wrench_balance";
    case Family::Friction: return "friction";
    case Family::MinForce: return "min_force";
    case Family::EnvContact: return "env_contact";
    case Family::Region: return "region";
    case Family::Tracking: return "tracking";
  }
  return "?";
}

TrajLayout ProblemSpec::layout() const {
  return TrajLayout{T, chain.nq(), model.dof(), nf(), env_contact};
}

Problem::Problem(ProblemSpec spec, State s0)
    : spec_(std::move(spec)), s0_(std::move(s0)), lay_(spec_.layout()) {
  if (spec_.T < 1) throw std::invalid_argument("horizon must be >= 1");
  if (spec_.kp.size() != spec_.chain.nq())
    throw std::invalid_argument("kp size does not match the chain");
  if (spec_.tracking &&
      spec_.track_anchor.size() != static_cast<size_t>(spec_.nf()))
    throw std::invalid_argument("tracking needs one anchor per finger");

  const int nf = spec_.nf();
  const int T = spec_.T;
  const int wrench_rows =
      static_cast<int>(spec_.model.wrench_projection().rows());

  auto push = [](std::vector<ConstraintInstance>& v, int& total, Family fam,
                 int t, int finger, bool eq, int size) {
    v.push_back({fam, t, finger, eq, size, total});
    total += size;
  };

  if (spec_.contact && !spec_.tracking)
    for (int t = spec_.contact_terminal_only ? T : 1; t <= T; ++t)
      for (int i = 0; i < nf; ++i)
        push(eq_, n_eq_, Family::Contact, t, i, true, 1);
  if (spec_.rolling && !spec_.tracking)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < nf; ++i)
        push(eq_, n_eq_, Family::Rolling, t, i, true, 2);
  if (spec_.balance)
    for (int t = 0; t < T; ++t)
      push(eq_, n_eq_, Family::TorqueBalance, t, -1, true, spec_.chain.nq());
  if (spec_.balance)
    for (int t = 0; t < T; ++t)
      push(eq_, n_eq_, Family::WrenchBalance, t, -1, true, wrench_rows);
  if (spec_.env_contact)
    for (int t = 1; t <= T; ++t)
      push(eq_, n_eq_, Family::EnvContact, t, -1, true, 1);
  if (spec_.tracking)
    for (int t = 1; t <= T; ++t)
      for (int i = 0; i < nf; ++i)
        push(eq_, n_eq_, Family::Tracking, t, i, true, 3);

  if (spec_.friction)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < nf; ++i)
        push(ineq_, n_ineq_, Family::Friction, t, i, false, 5);
  if (spec_.min_force)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < nf; ++i)
        push(ineq_, n_ineq_, Family::MinForce, t, i, false, 1);
  if (spec_.region)
    for (int t = 1; t <= T; ++t)
      push(ineq_, n_ineq_, Family::Region, t, -1, false, 1);
}

StepCache Problem::step_cache(const State& s, EstimateLevel level) const {
  StepCache cache;
  cache.fk = forward_kinematics(spec_.chain, s.q);
  cache.est.resize(spec_.nf());
  for (int i = 0; i < spec_.nf(); ++i) {
    const int nj = static_cast<int>(spec_.chain.fingers[i].joints.size());
    cache.est[i] = contact_estimate(cache.fk[i], nj, spec_.body.fingers[i],
                                    spec_.object, s.o, spec_.delta, level);
  }
  if (spec_.env_contact)
    cache.env = env_contact_estimate(spec_.env_points, s.o, spec_.env,
                                     spec_.delta, level);
  return cache;
}

const State& Problem::state_at(const Trajectory& traj, int t) const {
  return t == 0 ? s0_ : traj.states[t - 1];
}

int Problem::anchor(const ConstraintInstance& inst) const { return inst.t; }

ConstraintEval Problem::build(const ConstraintInstance& inst,
                              const Trajectory& traj,
                              const std::vector<StepCache>& caches,
                              bool grads) const {
  const StepCache& cache = caches[anchor(inst)];
  const int nq = spec_.chain.nq();
  const State& st = state_at(traj, inst.t);

  switch (inst.family) {
    case Family::Contact:
      return contact_constraint(cache.est[inst.finger], nq,
                                spec_.chain.finger_offset(inst.finger), grads);
    case Family::Rolling: {
      const State& s1 = traj.states[inst.t];
      return rolling_constraint(cache.est[inst.finger], nq,
                                spec_.chain.finger_offset(inst.finger), st.q,
                                s1.q, st.o, s1.o, spec_.dt,
                                spec_.rolling_exact_q, grads);
    }
    case Family::TorqueBalance: {
      const State& s1 = traj.states[inst.t];
      const Action& a = traj.actions[inst.t];
      return torque_balance(spec_.chain, cache.fk, cache.est, st.q, s1.q, a.u,
                            a.f, spec_.kp, grads);
    }
    case Family::WrenchBalance: {
      const State& s1 = traj.states[inst.t];
      const Action& a = traj.actions[inst.t];
      std::vector<int> off(spec_.nf());
      for (int i = 0; i < spec_.nf(); ++i) off[i] = spec_.chain.finger_offset(i);
      EnvArm arm;
      if (spec_.env_contact) {
        arm.c = cache.env.c;
        arm.dc_dx = cache.env.dc_dx;
        arm.dc_dw = cache.env.dc_dw;
      }
      return wrench_balance(cache.est, nq, off, a.f,
                            spec_.env_contact ? a.f_e : Vector3d::Zero(),
                            spec_.env_contact ? &arm : nullptr, spec_.mass,
                            spec_.com_body, st.o, s1.o, spec_.model, grads);
    }
    case Family::Friction: {
      const Action& a = traj.actions[inst.t];
      return friction_cone(cache.est[inst.finger], nq,
                           spec_.chain.finger_offset(inst.finger),
                           a.f[inst.finger], spec_.mu, inst.finger, spec_.nf(),
                           grads);
    }
    case Family::MinForce: {
      const Action& a = traj.actions[inst.t];
      return min_force(a.f[inst.finger], spec_.f_min, inst.finger, spec_.nf(),
                       grads);
    }
    case Family::EnvContact:
      return env_contact_constraint(cache.env, grads);
    case Family::Region:
      return region_constraint(cache.est[spec_.region->finger], nq,
                               spec_.chain.finger_offset(spec_.region->finger),
                               st.o, spec_.region->anchor_body,
                               spec_.region->radius, grads);
    case Family::Tracking:
      return tracking_constraint(cache.fk[inst.finger],
                                 spec_.chain.fingers[inst.finger], nq,
                                 spec_.chain.finger_offset(inst.finger), st.o,
                                 spec_.track_anchor[inst.finger], grads);
  }
  throw std::logic_error("unknown constraint family");
}

void Problem::residuals(const Trajectory& traj, Eigen::VectorXd& c,
                        Eigen::VectorXd& g) const {
  std::vector<StepCache> caches(spec_.T + 1);
  for (int t = 0; t <= spec_.T; ++t)
    caches[t] = step_cache(state_at(traj, t), EstimateLevel::Values);
  c.resize(n_eq_);
  g.resize(n_ineq_);
  for (const auto& inst : eq_)
    c.segment(inst.offset, inst.size) = build(inst, traj, caches, false).r;
  for (const auto& inst : ineq_)
    g.segment(inst.offset, inst.size) = build(inst, traj, caches, false).r;
}

void Problem::eval(const Trajectory& traj, Eigen::VectorXd& c,
                   Eigen::VectorXd& g, const Eigen::VectorXd& y_eq,
                   const Eigen::VectorXd& y_ineq, Eigen::VectorXd& grad) const {
  const int T = spec_.T;
  std::vector<StepCache> caches(T + 1);
  std::vector<Eigen::MatrixXd> Tb(T + 1);  // reduced-coordinate bases
  for (int t = 0; t <= T; ++t) {
    caches[t] = step_cache(state_at(traj, t), EstimateLevel::Gradients);
    Tb[t] = spec_.model.tangent_basis(state_at(traj, t).o);
  }
  c.resize(n_eq_);
  g.resize(n_ineq_);
  if (grad.size() != lay_.size()) grad.setZero(lay_.size());

  auto scatter = [&](const ConstraintInstance& inst, const ConstraintEval& ev,
                     const Eigen::VectorXd& y) {
    const bool state_family =
        inst.family == Family::Contact || inst.family == Family::EnvContact ||
        inst.family == Family::Region || inst.family == Family::Tracking;
    const int t = inst.t;
    auto add = [&](const Eigen::MatrixXd& M, int col, int n) {
      if (M.size()) grad.segment(col, n) += M.transpose() * y;
    };
    if (state_family || t >= 1) {
      add(ev.dq_t, lay_.q(std::max(t, 1)), lay_.nq);
      if (ev.do_t.size())
        grad.segment(lay_.z(std::max(t, 1)), lay_.dof) +=
            Tb[t].transpose() * (ev.do_t.transpose() * y);
    }
    if (!state_family) {
      add(ev.dq_t1, lay_.q(t + 1), lay_.nq);
      if (ev.do_t1.size())
        grad.segment(lay_.z(t + 1), lay_.dof) +=
            Tb[t + 1].transpose() * (ev.do_t1.transpose() * y);
      add(ev.du_t, lay_.u(t), lay_.nq);
      for (size_t i = 0; i < ev.df.size(); ++i)
        if (ev.df[i].size())
          grad.segment<3>(lay_.f(t, static_cast<int>(i))) +=
              ev.df[i].transpose() * y;
      if (lay_.env_force && ev.dfe.size())
        grad.segment<3>(lay_.fe(t)) += ev.dfe.transpose() * y;
    }
  };

  for (const auto& inst : eq_) {
    const ConstraintEval ev = build(inst, traj, caches, true);
    c.segment(inst.offset, inst.size) = ev.r;
    scatter(inst, ev, y_eq.segment(inst.offset, inst.size));
  }
  for (const auto& inst : ineq_) {
    const ConstraintEval ev = build(inst, traj, caches, true);
    g.segment(inst.offset, inst.size) = ev.r;
    scatter(inst, ev, y_ineq.segment(inst.offset, inst.size));
  }
}

ConstraintEval Problem::eval_instance(const ConstraintInstance& inst,
                                      const Trajectory& traj) const {
  std::vector<StepCache> caches(spec_.T + 1);
  caches[anchor(inst)] =
      step_cache(state_at(traj, anchor(inst)), EstimateLevel::Gradients);
  return build(inst, traj, caches, true);
}

std::array<double, kFamilyCount> Problem::family_residuals(
    const Eigen::VectorXd& c, const Eigen::VectorXd& g) const {
  std::array<double, kFamilyCount> out{};
  for (const auto& inst : eq_) {
    const double m = c.segment(inst.offset, inst.size).cwiseAbs().maxCoeff();
    auto& slot = out[static_cast<int>(inst.family)];
    slot = std::max(slot, m);
  }
  for (const auto& inst : ineq_) {
    const double m = g.segment(inst.offset, inst.size).maxCoeff();
    auto& slot = out[static_cast<int>(inst.family)];
    slot = std::max(slot, std::max(0.0, m));
  }
  return out;
}

double Problem::cost(const Trajectory& traj, Eigen::VectorXd* grad) const {
  return objective(traj, s0_, spec_.goal, spec_.weights, spec_.model, lay_,
                   grad);
}

Trajectory Problem::init_trajectory(uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> du(0.0, spec_.init_sigma_u);
  std::normal_distribution<double> df(0.0, spec_.init_sigma_f);
  const int T = spec_.T;
  const int nq = spec_.chain.nq();

  Trajectory traj;
  traj.states.resize(T);
  traj.actions.resize(T);
  Eigen::VectorXd q = s0_.q;
  for (int t = 0; t < T; ++t) {
    Action& a = traj.actions[t];
    a.u.resize(nq);
    for (int k = 0; k < nq; ++k) a.u[k] = du(rng);
    a.f.resize(spec_.nf());
    for (auto& fi : a.f)
      for (int k = 0; k < 3; ++k) fi[k] = df(rng);
    if (spec_.env_contact)
      for (int k = 0; k < 3; ++k) a.f_e[k] = df(rng);

    q += a.u;
    traj.states[t].q = q;
    traj.states[t].o =
        spec_.model.interpolate(s0_.o, spec_.goal, double(t + 1) / T);
  }
  return traj;
}

}  // namespace rollopt
