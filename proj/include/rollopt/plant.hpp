#pragma once

// Quasi-static rollout environment standing in for a physics simulator.
//
// The robot lands where its PD settles under the commanded forces: q + u
// deflected by kp^-1 (tau_g - sum J^T f), the same balance the optimizer
// constrains, approached over K substeps. At each substep the engaged
// hard-min contact points prescribe their own displacements to the object
// (pure rolling), the object's reduced-coordinate increment is the
// minimum-norm least-squares fit to those displacements, and a Newton
// projection then pushes the object back out of any residual penetration.
// No forces are integrated or solved for: the action's forces only deflect
// the PD landing, their physical plausibility is judged by auditing the
// optimizer's own residuals on executed transitions, and dropping is a
// geometric test, not gravity.

#include <array>
#include <string>
#include <vector>

#include "rollopt/problem.hpp"

namespace rollopt {

struct PlantConfig {
  int substeps{10};           // rolling linearization steps per action
  double contact_eps{5e-3};   // engagement distance for transport, m
  int proj_iters{30};         // penetration projection budget per substep
  double step_cap{0.05};      // reduced-coordinate sanity bound per substep
};

struct PlantStepInfo {
  int fallback_substeps{0};   // transport fit rejected; object held still
  bool projection_incomplete{false};
  double min_clearance{0.0};  // worst finger-sample distance after the step
};

class Plant {
 public:
  explicit Plant(const ProblemSpec& spec, PlantConfig cfg = {});

  State step(const State& s, const Action& a,
             PlantStepInfo* info = nullptr) const;

  // hard-min distance from each finger's samples to the object
  Eigen::VectorXd finger_gaps(const State& s) const;
  Vector3d com_world(const State& s) const;
  const PlantConfig& config() const { return cfg_; }

 private:
  // worst clearance of any finger sample (and env sample point, when an
  // environment is present) with the object at `o`
  double min_clearance(const std::vector<FingerFk>& fk, const Pose& o) const;
  void project(const std::vector<FingerFk>& fk, Pose& o,
               PlantStepInfo& inf) const;

  KinematicChain chain_;
  SampledBody body_;
  SdfScene object_;
  ObjectModel model_;
  bool has_env_{false};
  SdfScene env_;
  std::vector<Vector3d> env_points_;
  Vector3d com_body_;
  Eigen::VectorXd kp_;
  double f_max_{10.0};
  PlantConfig cfg_;
};

// Latching drop detector: a finger counts as lost once its gap stays beyond
// d_drop for `consecutive` steps; the floor test fires immediately.
struct DropThresholds {
  double d_drop{0.01};
  int consecutive{2};
  double floor_z{-1e30};
};

class DropDetector {
 public:
  explicit DropDetector(const DropThresholds& th = {}) : th_(th) {}
  void update(int step, const Eigen::VectorXd& finger_gaps, double com_z);
  bool dropped() const { return drop_step_ >= 0; }
  int drop_step() const { return drop_step_; }

 private:
  DropThresholds th_;
  std::vector<int> streak_;
  int drop_step_{-1};
};

struct EpisodeLog {
  std::vector<State> states;    // s_0 then one entry per executed action
  std::vector<Action> actions;
  // residual maxima per family on each executed transition, evaluated with
  // the optimizer's own constraint stack
  std::vector<std::array<double, kFamilyCount>> audit;
  std::vector<double> top_trace;  // tracked-point displacement, when used
  bool dropped{false};
  int drop_step{-1};
};

std::array<double, kFamilyCount> audit_step(const ProblemSpec& spec,
                                            const State& s, const Action& a,
                                            const State& s_next);

// |p_t - p_0| of a body-frame point, one entry per executed step
std::vector<double> top_displacement_trace(const EpisodeLog& log,
                                           const Vector3d& top_body);

struct MetricSpec {
  Pose goal;
  // report |hinge angle - valve_goal| instead of the orientation geodesic
  bool valve{false};
  double valve_goal{0.0};  // rad
  // validity additionally requires the tracked body point to stay within
  // top_tol of its start position at every step
  bool track_top{false};
  Vector3d top_body{Vector3d::Zero()};
  double top_tol{0.02};
};

struct EpisodeMetrics {
  double distance_deg{0.0};
  bool valid{false};
};

EpisodeMetrics metrics(const EpisodeLog& log, const MetricSpec& m,
                       const ObjectModel& model);

void write_episode_json(const EpisodeLog& log, const std::string& path);
void write_episode_csv(const EpisodeLog& log, const std::string& path);

}  // namespace rollopt
