#include "rollopt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>

namespace rollopt {
namespace {

// Powell-Hestenes-Rockafellar penalty for inequalities:
// psi(g) = (max(0, mu + rho g)^2 - mu^2) / (2 rho), with
// d psi / d g = max(0, mu + rho g), matching the multiplier estimate used
// for the gradient scatter.
double al_value(double cost, const Eigen::VectorXd& c, const Eigen::VectorXd& g,
                const Eigen::VectorXd& lam, const Eigen::VectorXd& mu,
                double rho) {
  double L = cost + lam.dot(c) + 0.5 * rho * c.squaredNorm();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double t = std::max(0.0, mu[i] + rho * g[i]);
    L += (t * t - mu[i] * mu[i]) / (2.0 * rho);
  }
  return L;
}

double max_violation(const Eigen::VectorXd& c, const Eigen::VectorXd& g) {
  double v = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
  if (g.size()) v = std::max(v, std::max(0.0, g.maxCoeff()));
  return v;
}

void check_finite(const Problem& prob, const Eigen::VectorXd& c,
                  const Eigen::VectorXd& g) {
  auto scan = [](const Eigen::VectorXd& v,
                 const std::vector<ConstraintInstance>& insts,
                 const char* kind) {
    if (v.allFinite()) return;
    for (const auto& inst : insts)
      if (!v.segment(inst.offset, inst.size).allFinite())
        throw std::runtime_error(std::string("non-finite ") + kind +
                                 " residual: " + family_name(inst.family) +
                                 " at t=" + std::to_string(inst.t));
    throw std::runtime_error(std::string("non-finite ") + kind + " residual");
  };
  scan(c, prob.equalities(), "equality");
  scan(g, prob.inequalities(), "inequality");
}

struct Merit {
  double cost = 0.0;
  Eigen::VectorXd c, g;
  double L = 0.0;
};

Merit merit_at(const Problem& prob, const Trajectory& traj,
               const Eigen::VectorXd& lam, const Eigen::VectorXd& mu,
               double rho) {
  Merit m;
  m.cost = prob.cost(traj, nullptr);
  prob.residuals(traj, m.c, m.g);
  check_finite(prob, m.c, m.g);
  m.L = al_value(m.cost, m.c, m.g, lam, mu, rho);
  return m;
}

// Limited-memory BFGS direction for the inner subproblem. Curvature pairs
// come from projected steps, which is the usual pragmatic treatment of the
// box bounds; the memory is dropped whenever the multipliers or the penalty
// change, since those change the function being minimized.
class Lbfgs {
 public:
  explicit Lbfgs(int m) : m_(m) {}

  void reset() { pairs_.clear(); }

  void push(Eigen::VectorXd s, Eigen::VectorXd y) {
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      pairs_.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(pairs_.size()) > m_) pairs_.pop_front();
    }
  }

  Eigen::VectorXd dir(const Eigen::VectorXd& grad) const {
    if (pairs_.empty()) return -grad;
    Eigen::VectorXd q = grad;
    std::vector<double> a(pairs_.size());
    for (int i = static_cast<int>(pairs_.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = pairs_[i];
      a[i] = s.dot(q) / s.dot(y);
      q -= a[i] * y;
    }
    const auto& [sl, yl] = pairs_.back();
    q *= sl.dot(yl) / yl.squaredNorm();
    for (size_t i = 0; i < pairs_.size(); ++i) {
      const auto& [s, y] = pairs_[i];
      const double b = y.dot(q) / s.dot(y);
      q += (a[i] - b) * s;
    }
    return -q;
  }

 private:
  int m_;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs_;
};

}  // namespace

std::pair<Trajectory, SolveReport> solve(const Problem& prob,
                                         const Trajectory& init,
                                         const SolverConfig& cfg,
                                         const WarmStart* warm) {
  const TrajLayout& lay = prob.layout();
  const ObjectModel& model = prob.spec().model;
  const KinematicChain& chain = prob.spec().chain;

  Trajectory traj = init;
  clamp_to_bounds(traj, chain, prob.spec().f_max);

  Eigen::VectorXd lam = Eigen::VectorXd::Zero(prob.n_eq());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(prob.n_ineq());
  double rho = cfg.rho0;
  if (warm) {
    if (warm->lambda.size() == prob.n_eq()) lam = warm->lambda;
    if (warm->mu.size() == prob.n_ineq()) mu = warm->mu;
    if (warm->rho > 0) rho = warm->rho;
  }

  SolveReport rep;
  rep.feasibility_history.reserve(cfg.outer_iters);
  rep.rho_history.reserve(cfg.outer_iters);

  // Fused augmented-Lagrangian gradient at the current merit point.
  auto al_grad = [&](const Trajectory& at, const Merit& m) {
    Eigen::VectorXd grad;
    prob.cost(at, &grad);
    const Eigen::VectorXd y_eq = lam + rho * m.c;
    const Eigen::VectorXd y_ineq = (mu + rho * m.g).cwiseMax(0.0);
    Eigen::VectorXd ctmp, gtmp;
    prob.eval(at, ctmp, gtmp, y_eq, y_ineq, grad);
    if (!grad.allFinite())
      throw std::runtime_error("non-finite augmented-Lagrangian gradient");
    return grad;
  };

  Merit cur = merit_at(prob, traj, lam, mu, rho);
  Lbfgs lbfgs(cfg.lbfgs_memory);
  double prev_viol = std::numeric_limits<double>::infinity();
  double eta = std::numeric_limits<double>::infinity();
  bool rho_changed = false;

  const bool debug = std::getenv("ROLLOPT_DEBUG") != nullptr;

  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    // A multiplier update only shifts the gradient linearly, so curvature
    // pairs stay valid across it; penalty growth changes the Hessian.
    if (rho_changed) lbfgs.reset();
    Eigen::VectorXd grad = al_grad(traj, cur);
    bool moved = false;
    int inner_used = 0;
    const char* inner_exit = "budget";

    for (int inner = 0; inner < cfg.inner_iters; ++inner) {
      bool accepted = false;
      bool stationary = false;
      Eigen::VectorXd step_taken, grad_before;

      // Try the quasi-Newton direction, then steepest descent if it was
      // rejected; the first trial displacement is capped at cfg.trust_cap
      // per coordinate so fresh directions cannot fling the iterate.
      for (int attempt = 0; attempt < 2 && !accepted && !stationary; ++attempt) {
        Eigen::VectorXd d = attempt == 0 ? lbfgs.dir(grad) : -grad;
        if (grad.dot(d) >= 0) continue;  // not a descent direction
        const double dinf = d.lpNorm<Eigen::Infinity>();
        if (dinf == 0) continue;
        double alpha = std::min(1.0, cfg.trust_cap / dinf);
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
          Trajectory cand = apply_step(traj, lay, model, d, alpha);
          clamp_to_bounds(cand, chain, prob.spec().f_max);
          const Eigen::VectorXd delta = traj_difference(traj, cand, lay, model);
          if (delta.lpNorm<Eigen::Infinity>() < cfg.tol_step) {
            // Projection leaves nothing of this direction; for steepest
            // descent that means a stationary point of the subproblem.
            if (attempt == 1) stationary = true;
            break;
          }
          const double slope = grad.dot(delta);
          if (slope >= 0) break;  // blocked by the bounds
          const Merit cm = merit_at(prob, cand, lam, mu, rho);
          if (cm.L <= cur.L + cfg.armijo_c * slope) {
            traj = std::move(cand);
            cur = cm;
            step_taken = delta;
            accepted = true;
            break;
          }
          alpha *= cfg.armijo_shrink;
        }
      }

      if (!accepted) break;
      moved = true;
      grad_before = std::move(grad);
      grad = al_grad(traj, cur);
      lbfgs.push(std::move(step_taken), grad - grad_before);
    }

    const double viol = max_violation(cur.c, cur.g);
    rep.feasibility_history.push_back(viol);
    rep.rho_history.push_back(rho);
    rep.outer_used = outer + 1;
    // Feasible and inner-stationary: stop before touching the multipliers,
    // so the returned (trajectory, lambda, mu) is a consistent stationary
    // pair and a warm-started re-solve reproduces it.
    if (viol <= cfg.tol_constraint && !moved) break;

    // Penalty growth whenever the violation failed to halve across the
    // outer iteration; this makes "feasibility decreased or rho grew" hold
    // on every consecutive pair of the history.
    const double new_rho = viol > 0.5 * prev_viol
                               ? std::min(rho * cfg.rho_growth, cfg.rho_max)
                               : rho;
    // Multipliers absorb the penalty only when the subproblem brought the
    // violation under the moving target eta; on failure eta relaxes toward
    // the achieved level so updates resume instead of freezing, on success
    // it tightens. Gating the update keeps a poorly solved subproblem from
    // poisoning the multipliers.
    if (viol <= eta) {
      lam += rho * cur.c;
      mu = (mu + rho * cur.g).cwiseMax(0.0);
      eta = std::max(0.5 * cfg.tol_constraint, 0.45 * viol);
    } else {
      eta = std::min(eta * 1.3, viol);
    }
    rho_changed = new_rho != rho;
    rho = new_rho;
    prev_viol = viol;
    cur.L = al_value(cur.cost, cur.c, cur.g, lam, mu, rho);
  }

  rep.cost = cur.cost;
  rep.max_violation = max_violation(cur.c, cur.g);
  rep.converged = rep.max_violation <= cfg.tol_constraint;
  rep.family = prob.family_residuals(cur.c, cur.g);
  rep.lambda = std::move(lam);
  rep.mu = std::move(mu);
  rep.rho_final = rho;
  return {std::move(traj), rep};
}

std::pair<Trajectory, SolveReport> solve_multistart(const Problem& prob,
                                                    const SolverConfig& cfg) {
  const int n = std::max(1, cfg.particles);
  std::vector<std::pair<Trajectory, SolveReport>> runs(n);

  auto run_one = [&](int k) {
    const std::uint64_t seed = cfg.seed * 8191u + static_cast<std::uint64_t>(k);
    return solve(prob, prob.init_trajectory(seed), cfg);
  };

  if (cfg.parallel && n > 1) {
    std::vector<std::future<std::pair<Trajectory, SolveReport>>> futs;
    futs.reserve(n);
    for (int k = 0; k < n; ++k)
      futs.push_back(std::async(std::launch::async, run_one, k));
    for (int k = 0; k < n; ++k) runs[k] = futs[k].get();
  } else {
    for (int k = 0; k < n; ++k) runs[k] = run_one(k);
  }

  // Deterministic selection independent of completion order: feasible
  // particles first, then lower max violation, then lower cost, then index.
  int best = 0;
  auto better = [&](int a, int b) {
    const SolveReport& ra = runs[a].second;
    const SolveReport& rb = runs[b].second;
    const bool fa = ra.max_violation <= cfg.tol_constraint;
    const bool fb = rb.max_violation <= cfg.tol_constraint;
    if (fa != fb) return fa;
    if (fa && fb && ra.cost != rb.cost) return ra.cost < rb.cost;
    if (ra.max_violation != rb.max_violation)
      return ra.max_violation < rb.max_violation;
    if (ra.cost != rb.cost) return ra.cost < rb.cost;
    return a < b;
  };
  for (int k = 1; k < n; ++k)
    if (better(k, best)) best = k;

  runs[best].second.best_particle = best;
  return std::move(runs[best]);
}

std::pair<Trajectory, SolveReport> pregrasp_solve(const ProblemSpec& spec,
                                                  const State& s0,
                                                  const SolverConfig& cfg) {
  ProblemSpec pre = spec;
  pre.contact = true;
  pre.contact_terminal_only = true;
  pre.rolling = false;
  pre.balance = false;
  pre.friction = false;
  pre.min_force = false;
  pre.tracking = false;
  pre.env_contact = false;
  pre.region.reset();
  // Pin the object goal to its current pose: the cost keeps the object in
  // place while the terminal contact equalities pull the fingers onto it.
  pre.goal = s0.o;
  return solve_multistart(Problem(pre, s0), cfg);
}

}  // namespace rollopt
