#include "rollopt/mpc.hpp"

#include <map>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace rollopt {

Trajectory shift_warm_start(const Trajectory& prev) {
  if (prev.horizon() < 2)
    throw std::invalid_argument("shift_warm_start: horizon already 1");
  Trajectory out;
  out.states.assign(prev.states.begin() + 1, prev.states.end());
  out.actions.assign(prev.actions.begin() + 1, prev.actions.end());
  return out;
}

namespace {

using Key = std::tuple<int, int, int>;  // family, t, finger

void shift_slices(const std::vector<ConstraintInstance>& prev_insts,
                  const std::vector<ConstraintInstance>& next_insts,
                  int n_prev, int n_next, const Eigen::VectorXd& src,
                  Eigen::VectorXd& dst) {
  dst = Eigen::VectorXd::Zero(n_next);
  if (src.size() != n_prev) return;  // stale or absent multipliers: cold start
  std::map<Key, const ConstraintInstance*> by_key;
  for (const ConstraintInstance& inst : prev_insts)
    by_key.emplace(Key{static_cast<int>(inst.family), inst.t, inst.finger},
                   &inst);
  for (const ConstraintInstance& inst : next_insts) {
    auto it = by_key.find(
        Key{static_cast<int>(inst.family), inst.t + 1, inst.finger});
    if (it == by_key.end() || it->second->size != inst.size) continue;
    dst.segment(inst.offset, inst.size) =
        src.segment(it->second->offset, inst.size);
  }
}

}  // namespace

void shift_multipliers(const Problem& prev, const Problem& next,
                       const Eigen::VectorXd& lam_prev,
                       const Eigen::VectorXd& mu_prev, Eigen::VectorXd& lam,
                       Eigen::VectorXd& mu) {
  shift_slices(prev.equalities(), next.equalities(), prev.n_eq(),
               next.n_eq(), lam_prev, lam);
  shift_slices(prev.inequalities(), next.inequalities(), prev.n_ineq(),
               next.n_ineq(), mu_prev, mu);
}

MpcController::MpcController(ProblemSpec spec, State s0,
                             const SolverConfig& warmup, SolverConfig online)
    : spec_(std::move(spec)),
      s0_(std::move(s0)),
      online_(online),
      prob_(spec_, s0_) {
  if (spec_.T < 1) throw std::invalid_argument("MpcController: T < 1");
  std::tie(plan_, rep_) = solve_multistart(prob_, warmup);
}

void MpcController::advance(const State& executed) {
  if (done_) throw std::logic_error("MpcController::advance after done()");
  s0_ = executed;
  if (spec_.T == 1) {
    done_ = true;
    return;
  }
  spec_.T -= 1;
  Problem next(spec_, s0_);
  Trajectory warm_traj = shift_warm_start(plan_);
  WarmStart ws;
  shift_multipliers(prob_, next, rep_.lambda, rep_.mu, ws.lambda, ws.mu);
  ws.rho = rep_.rho_final;
  prob_ = std::move(next);
  std::tie(plan_, rep_) = solve(prob_, warm_traj, online_, &ws);
}

}  // namespace rollopt
