#pragma once

// Receding-horizon execution of one episode: plan over the remaining steps,
// hand out the first action, re-plan from the state the plant actually
// reached with the previous solution shifted by one step. The episode runs
// exactly the initial horizon's actions.

#include "rollopt/problem.hpp"
#include "rollopt/solver.hpp"

namespace rollopt {

// prev's tail as the initial guess after one executed step: drop s_1 and u_0.
Trajectory shift_warm_start(const Trajectory& prev);

// Multipliers for the horizon shortened by one: each instance of `next`
// takes the slice of the `prev` instance with the same family and finger one
// step later. With the family-major enumeration every next instance has a
// source; anything unmatched starts at zero.
void shift_multipliers(const Problem& prev, const Problem& next,
                       const Eigen::VectorXd& lam_prev,
                       const Eigen::VectorXd& mu_prev, Eigen::VectorXd& lam,
                       Eigen::VectorXd& mu);

class MpcController {
 public:
  // Plans the full horizon once with a multi-start warmup solve.
  MpcController(ProblemSpec spec, State s0, const SolverConfig& warmup,
                SolverConfig online);

  int horizon() const { return spec_.T; }
  bool done() const { return done_; }
  const Trajectory& plan() const { return plan_; }
  const SolveReport& report() const { return rep_; }
  const Problem& problem() const { return prob_; }

  // First action of the current plan; valid until done().
  const Action& current_action() const { return plan_.actions.front(); }

  // Accept the executed state and re-plan the remaining horizon with a
  // single warm-started particle. After the last action this only records
  // the state and flips done().
  void advance(const State& executed);

 private:
  ProblemSpec spec_;
  State s0_;
  SolverConfig online_;
  Problem prob_;
  Trajectory plan_;
  SolveReport rep_;
  bool done_{false};
};

}  // namespace rollopt
