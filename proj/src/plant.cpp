#include "rollopt/plant.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rollopt/constraints.hpp"

namespace rollopt {

Plant::Plant(const ProblemSpec& spec, PlantConfig cfg)
    : chain_(spec.chain),
      body_(spec.body),
      object_(spec.object),
      model_(spec.model),
      has_env_(spec.env_contact),
      com_body_(spec.com_body),
      kp_(spec.kp),
      f_max_(spec.f_max),
      cfg_(cfg) {
  if (has_env_) {
    env_ = spec.env;
    env_points_ = spec.env_points;
  }
}

Vector3d Plant::com_world(const State& s) const {
  return s.o.act(com_body_);
}

namespace {

// hard-min sample of one finger: distance and the argmin index
std::pair<double, int> finger_hard_min(const FingerFk& fk,
                                       const SampledFinger& sf,
                                       const SdfScene& object, const Pose& o) {
  double best = 1e30;
  int arg = -1;
  for (int j = 0; j < static_cast<int>(sf.points.size()); ++j) {
    const Vector3d w = fk.link_pose[sf.link].act(sf.points[j]);
    const double phi = scene_sdf(object, o, w, false).phi;
    if (phi < best) {
      best = phi;
      arg = j;
    }
  }
  return {best, arg};
}

}  // namespace

Eigen::VectorXd Plant::finger_gaps(const State& s) const {
  const auto fk = forward_kinematics(chain_, s.q);
  const int nf = static_cast<int>(body_.fingers.size());
  Eigen::VectorXd gaps(nf);
  for (int i = 0; i < nf; ++i)
    gaps[i] = finger_hard_min(fk[i], body_.fingers[i], object_, s.o).first;
  return gaps;
}

double Plant::min_clearance(const std::vector<FingerFk>& fk,
                            const Pose& o) const {
  double worst = 1e30;
  for (size_t i = 0; i < body_.fingers.size(); ++i) {
    const SampledFinger& sf = body_.fingers[i];
    for (const Vector3d& p : sf.points) {
      const Vector3d w = fk[i].link_pose[sf.link].act(p);
      worst = std::min(worst, scene_sdf(object_, o, w, false).phi);
    }
  }
  if (has_env_)
    for (const Vector3d& p : env_points_)
      worst = std::min(
          worst, scene_sdf(env_, Pose::Identity(), o.act(p), false).phi);
  return worst;
}

// penetration below this depth is float noise, not contact violation
constexpr double kPenTol = 1e-12;

void Plant::project(const std::vector<FingerFk>& fk, Pose& o,
                    PlantStepInfo& inf) const {
  const int dof = model_.dof();
  for (int it = 0; it < cfg_.proj_iters; ++it) {
    // every penetrating sample contributes a clearance row; Gauss-Newton
    // finds the smallest reduced-coordinate move clearing them all at once,
    // or the balanced compromise when the fingers genuinely pinch
    std::vector<Eigen::VectorXd> grads;
    std::vector<double> depths;
    const Eigen::MatrixXd B = model_.tangent_basis(o);
    const Matrix3d R = o.q.toRotationMatrix();
    for (size_t i = 0; i < body_.fingers.size(); ++i) {
      const SampledFinger& sf = body_.fingers[i];
      for (const Vector3d& p : sf.points) {
        const Vector3d w = fk[i].link_pose[sf.link].act(p);
        const SdfResult sd = scene_sdf(object_, o, w, true);
        if (sd.phi >= -kPenTol) continue;
        Eigen::Matrix<double, 1, 6> d6;
        d6 << sd.dphi_dx.transpose(), sd.dphi_dw.transpose();
        grads.push_back((d6 * B).transpose());
        depths.push_back(sd.phi);
      }
    }
    if (has_env_)
      for (const Vector3d& p : env_points_) {
        const SdfResult sd =
            scene_sdf(env_, Pose::Identity(), o.act(p), true);
        if (sd.phi >= -kPenTol) continue;
        Eigen::Matrix<double, 1, 6> d6;
        d6.leftCols<3>() = sd.dphi_dp.transpose();
        d6.rightCols<3>() = -sd.dphi_dp.transpose() * R * skew(p);
        grads.push_back((d6 * B).transpose());
        depths.push_back(sd.phi);
      }
    if (depths.empty()) return;
    const int m = static_cast<int>(depths.size());
    Eigen::MatrixXd G(m, dof);
    Eigen::VectorXd r(m);
    for (int j = 0; j < m; ++j) {
      G.row(j) = grads[j].transpose();
      r[j] = 1e-9 - depths[j];
    }
    // the coarse threshold matters: near-parallel rows from one sample
    // cluster otherwise turn a sub-millimeter depth difference into a
    // centimeter step along their barely-distinguishable difference
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(0.03);
    cod.compute(G);
    Eigen::VectorXd z = cod.solve(r);
    if (!z.allFinite() || z.lpNorm<Eigen::Infinity>() < 1e-12) break;
    const double zmax = z.lpNorm<Eigen::Infinity>();
    if (zmax > cfg_.step_cap) z *= cfg_.step_cap / zmax;
    o = model_.retract(o, z);
  }
  if (min_clearance(fk, o) < -kPenTol) inf.projection_incomplete = true;
}

State Plant::step(const State& s, const Action& a, PlantStepInfo* info) const {
  PlantStepInfo inf;
  const int nf = static_cast<int>(body_.fingers.size());
  const Eigen::VectorXd alim = chain_.action_limits();
  const Eigen::VectorXd u = a.u.cwiseMax(-alim).cwiseMin(alim);

  // PD settling point under the commanded forces and gravity, evaluated at
  // the step's start configuration like the optimizer's torque balance
  auto fk0 = forward_kinematics(chain_, s.q);
  Eigen::VectorXd tau = gravity_torque(chain_, s.q, fk0);
  for (int i = 0; i < nf; ++i) {
    const SampledFinger& sf = body_.fingers[i];
    const auto [phi, arg] = finger_hard_min(fk0[i], sf, object_, s.o);
    if (arg < 0) continue;
    const Vector3d fi =
        a.f[i].cwiseMax(Vector3d::Constant(-f_max_)).cwiseMin(
            Vector3d::Constant(f_max_));
    const Vector3d w = fk0[i].link_pose[sf.link].act(sf.points[arg]);
    tau.segment(chain_.finger_offset(i), fk0[i].link_pose.size()) -=
        point_jacobian(fk0[i], sf.link, w).transpose() * fi;
  }
  const Eigen::VectorXd q_land =
      (s.q + u + tau.cwiseQuotient(kp_))
          .cwiseMax(chain_.lower_limits())
          .cwiseMin(chain_.upper_limits());

  const int K = cfg_.substeps;
  const int dof = model_.dof();
  Pose o = s.o;
  auto fk_a = std::move(fk0);
  for (int k = 1; k <= K; ++k) {
    const Eigen::VectorXd q_b =
        s.q + (static_cast<double>(k) / K) * (q_land - s.q);
    auto fk_b = forward_kinematics(chain_, q_b);

    // engaged contacts drag the object with their material-point
    // displacements: two tangential rows are the pure-rolling condition and
    // the normal row maintains the contact the way the planner's gap
    // equality does. Penetration only relaxes the normal row outward;
    // a separation gap is never yanked closed.
    const Eigen::MatrixXd B = model_.tangent_basis(o);
    const Matrix3d R = o.q.toRotationMatrix();
    Eigen::MatrixXd A(3 * nf, dof);
    Eigen::VectorXd b(3 * nf);
    int rows = 0;
    for (int i = 0; i < nf; ++i) {
      const SampledFinger& sf = body_.fingers[i];
      const auto [phi, arg] = finger_hard_min(fk_a[i], sf, object_, o);
      if (arg < 0 || phi > cfg_.contact_eps) continue;
      const Vector3d p_prev = fk_a[i].link_pose[sf.link].act(sf.points[arg]);
      const Vector3d p_new = fk_b[i].link_pose[sf.link].act(sf.points[arg]);
      const SdfResult sd = scene_sdf(object_, o, p_prev, true);
      if (sd.dphi_dp.norm() < 1e-9) continue;  // degenerate interior point
      const Vector3d n = sd.dphi_dp.normalized();
      const Eigen::Matrix<double, 2, 3> Tan = tangent_basis_2d(n);
      Eigen::Matrix<double, 3, 6> A6;
      A6.leftCols<3>() = Matrix3d::Identity();
      A6.rightCols<3>() = -skew(p_prev - o.p) * R;
      A.middleRows<2>(rows) = Tan * A6 * B;
      b.segment<2>(rows) = Tan * (p_new - p_prev);
      A.row(rows + 2) = n.transpose() * A6 * B;
      b[rows + 2] =
          n.dot(p_new - p_prev) + (phi < -kPenTol ? phi : 0.0);
      rows += 3;
    }

    if (rows > 0 && b.head(rows).lpNorm<Eigen::Infinity>() > 1e-12) {
      // rank-revealing solve with a coarse relative threshold: directions
      // the contact set determines only weakly stay put instead of being
      // amplified into launches by a tiny singular value
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
      cod.setThreshold(0.03);
      cod.compute(A.topRows(rows));
      Eigen::VectorXd z = cod.solve(b.head(rows));
      if (!z.allFinite()) {
        ++inf.fallback_substeps;
      } else {
        const double zmax = z.lpNorm<Eigen::Infinity>();
        if (zmax > cfg_.step_cap) {
          z *= cfg_.step_cap / zmax;
          ++inf.fallback_substeps;
        }
        if (zmax > 1e-12) o = model_.retract(o, z);
      }
    }
    project(fk_b, o, inf);
    fk_a = std::move(fk_b);
  }

  inf.min_clearance = min_clearance(fk_a, o);
  if (info) *info = inf;
  return State{q_land, o};
}

void DropDetector::update(int step, const Eigen::VectorXd& finger_gaps,
                          double com_z) {
  if (dropped()) return;
  if (streak_.size() != static_cast<size_t>(finger_gaps.size()))
    streak_.assign(finger_gaps.size(), 0);
  bool lost = com_z < th_.floor_z;
  for (int i = 0; i < finger_gaps.size(); ++i) {
    streak_[i] = finger_gaps[i] > th_.d_drop ? streak_[i] + 1 : 0;
    lost = lost || streak_[i] >= th_.consecutive;
  }
  if (lost) drop_step_ = step;
}

std::array<double, kFamilyCount> audit_step(const ProblemSpec& spec,
                                            const State& s, const Action& a,
                                            const State& s_next) {
  ProblemSpec one = spec;
  one.T = 1;
  Problem prob(one, s);
  Trajectory tr;
  tr.states = {s_next};
  tr.actions = {a};
  Eigen::VectorXd c, g;
  prob.residuals(tr, c, g);
  return prob.family_residuals(c, g);
}

std::vector<double> top_displacement_trace(const EpisodeLog& log,
                                           const Vector3d& top_body) {
  std::vector<double> trace;
  if (log.states.empty()) return trace;
  const Vector3d start = log.states.front().o.act(top_body);
  for (size_t t = 1; t < log.states.size(); ++t)
    trace.push_back((log.states[t].o.act(top_body) - start).norm());
  return trace;
}

EpisodeMetrics metrics(const EpisodeLog& log, const MetricSpec& m,
                       const ObjectModel& model) {
  EpisodeMetrics out;
  if (log.states.empty()) return out;
  const Pose& last = log.states.back().o;
  if (m.valve) {
    const double angle =
        model.difference(log.states.front().o, last)[0];
    out.distance_deg = std::abs(angle - m.valve_goal) * 180.0 / M_PI;
  } else {
    out.distance_deg =
        quat_log(last.q.conjugate() * m.goal.q).norm() * 180.0 / M_PI;
  }
  out.valid = !log.dropped;
  if (m.track_top)
    for (double d : top_displacement_trace(log, m.top_body))
      out.valid = out.valid && d <= m.top_tol;
  return out;
}

namespace {

nlohmann::json to_json(const State& s) {
  nlohmann::json j;
  j["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
  j["p"] = {s.o.p.x(), s.o.p.y(), s.o.p.z()};
  j["quat"] = {s.o.q.w(), s.o.q.x(), s.o.q.y(), s.o.q.z()};
  return j;
}

nlohmann::json to_json(const Action& a) {
  nlohmann::json j;
  j["u"] = std::vector<double>(a.u.data(), a.u.data() + a.u.size());
  nlohmann::json fs = nlohmann::json::array();
  for (const Vector3d& f : a.f) fs.push_back({f.x(), f.y(), f.z()});
  j["f"] = fs;
  j["f_e"] = {a.f_e.x(), a.f_e.y(), a.f_e.z()};
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_episode_json(const EpisodeLog& log, const std::string& path) {
  nlohmann::json j;
  j["dropped"] = log.dropped;
  j["drop_step"] = log.drop_step;
  j["states"] = nlohmann::json::array();
  for (const State& s : log.states) j["states"].push_back(to_json(s));
  j["actions"] = nlohmann::json::array();
  for (const Action& a : log.actions) j["actions"].push_back(to_json(a));
  j["audit"] = nlohmann::json::array();
  for (const auto& fam : log.audit) {
    nlohmann::json row;
    for (int f = 0; f < kFamilyCount; ++f)
      row[family_name(static_cast<Family>(f))] = fam[f];
    j["audit"].push_back(row);
  }
  j["top_trace"] = log.top_trace;
  open_out(path) << j.dump(2) << "\n";
}

void write_episode_csv(const EpisodeLog& log, const std::string& path) {
  std::ofstream out = open_out(path);
  const int nq = log.states.empty() ? 0 : static_cast<int>(log.states[0].q.size());
  const int nf = log.actions.empty() ? 0 : static_cast<int>(log.actions[0].f.size());
  out << "step";
  for (int i = 0; i < nq; ++i) out << ",q" << i;
  out << ",px,py,pz,qw,qx,qy,qz";
  for (int i = 0; i < nq; ++i) out << ",u" << i;
  for (int i = 0; i < nf; ++i)
    out << ",f" << i << "x,f" << i << "y,f" << i << "z";
  out << ",fex,fey,fez";
  for (int f = 0; f < kFamilyCount; ++f)
    out << ",audit_" << family_name(static_cast<Family>(f));
  out << ",top\n";
  for (size_t t = 0; t < log.actions.size(); ++t) {
    const State& s = log.states[t + 1];
    const Action& a = log.actions[t];
    out << t;
    for (int i = 0; i < nq; ++i) out << "," << s.q[i];
    out << "," << s.o.p.x() << "," << s.o.p.y() << "," << s.o.p.z() << ","
        << s.o.q.w() << "," << s.o.q.x() << "," << s.o.q.y() << ","
        << s.o.q.z();
    for (int i = 0; i < nq; ++i) out << "," << a.u[i];
    for (int i = 0; i < nf; ++i)
      out << "," << a.f[i].x() << "," << a.f[i].y() << "," << a.f[i].z();
    out << "," << a.f_e.x() << "," << a.f_e.y() << "," << a.f_e.z();
    for (int f = 0; f < kFamilyCount; ++f)
      out << "," << (t < log.audit.size() ? log.audit[t][f] : 0.0);
    out << "," << (t < log.top_trace.size() ? log.top_trace[t] : 0.0) << "\n";
  }
}

}  // namespace rollopt
