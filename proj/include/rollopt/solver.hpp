#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "rollopt/problem.hpp"

namespace rollopt {

struct SolverConfig {
  int outer_iters = 100;  // augmented-Lagrangian iterations (the budget unit)
  int inner_iters = 30;   // quasi-Newton steps per outer iteration
  double rho0 = 10.0;
  double rho_growth = 2.0;   // applied when max violation drops < 50%
  // Larger caps make the subproblem too stiff for the first-order inner
  // solver and the dual steps overshoot; 1e4 is the empirical sweet spot.
  double rho_max = 1e4;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  int max_backtracks = 30;
  int lbfgs_memory = 8;
  // per-coordinate cap on the first trial displacement of a line search
  double trust_cap = 0.05;
  int particles = 8;
  std::uint64_t seed = 0;
  double tol_constraint = 1e-4;  // infinity norm over all residuals
  double tol_step = 1e-10;       // infinity norm of the accepted inner step
  bool parallel = true;
};

struct SolveReport {
  bool converged = false;
  int outer_used = 0;
  double cost = 0.0;
  double max_violation = 0.0;
  std::array<double, kFamilyCount> family{};  // max residual per family
  // One entry per outer iteration. Invariant by construction: on every
  // consecutive pair, feasibility decreased, or rho grew, or rho was already
  // saturated at rho_max (growth requested but capped).
  std::vector<double> feasibility_history;
  std::vector<double> rho_history;
  int best_particle = 0;
  // Final multipliers and penalty, for warm-started re-solves.
  Eigen::VectorXd lambda;  // equalities
  Eigen::VectorXd mu;      // inequalities
  double rho_final = 0.0;
};

struct WarmStart {
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  double rho = 0.0;  // <= 0 means use cfg.rho0
};

// Single-particle augmented-Lagrangian solve from a given initial trajectory.
// Throws std::runtime_error on NaN in any residual or gradient.
std::pair<Trajectory, SolveReport> solve(const Problem& prob, const Trajectory& init,
                                         const SolverConfig& cfg,
                                         const WarmStart* warm = nullptr);

// Multi-start solve: cfg.particles independent runs from
// prob.init_trajectory(cfg.seed * 8191 + k), best particle selected by
// (feasible first, then max violation, then cost, then index). Deterministic
// for a fixed seed regardless of thread scheduling.
std::pair<Trajectory, SolveReport> solve_multistart(const Problem& prob,
                                                    const SolverConfig& cfg);

// Reach-contact solve: same objective and bounds, but the only constraints
// kept are the contact equalities at the terminal step, and the object goal
// is pinned to its start pose so the object is not dragged by the cost.
std::pair<Trajectory, SolveReport> pregrasp_solve(const ProblemSpec& spec,
                                                  const State& s0,
                                                  const SolverConfig& cfg);

}  // namespace rollopt
