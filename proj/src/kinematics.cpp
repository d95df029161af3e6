#include "rollopt/kinematics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rollopt/errors.hpp"

namespace rollopt {

int KinematicChain::nq() const {
  int n = 0;
  for (const auto& f : fingers) n += static_cast<int>(f.joints.size());
  return n;
}

int KinematicChain::finger_offset(int finger) const {
  int n = 0;
  for (int i = 0; i < finger; ++i) n += static_cast<int>(fingers[i].joints.size());
  return n;
}

Eigen::VectorXd KinematicChain::lower_limits() const {
  Eigen::VectorXd v(nq());
  int i = 0;
  for (const auto& f : fingers)
    for (const auto& j : f.joints) v[i++] = j.lower;
  return v;
}

Eigen::VectorXd KinematicChain::upper_limits() const {
  Eigen::VectorXd v(nq());
  int i = 0;
  for (const auto& f : fingers)
    for (const auto& j : f.joints) v[i++] = j.upper;
  return v;
}

Eigen::VectorXd KinematicChain::action_limits() const {
  Eigen::VectorXd v(nq());
  int i = 0;
  for (const auto& f : fingers)
    for (const auto& j : f.joints) v[i++] = j.action_limit;
  return v;
}

std::vector<FingerFk> forward_kinematics(const KinematicChain& chain,
                                         const Eigen::VectorXd& q) {
  std::vector<FingerFk> out(chain.fingers.size());
  int qi = 0;
  for (size_t fi = 0; fi < chain.fingers.size(); ++fi) {
    const Finger& fg = chain.fingers[fi];
    FingerFk& fk = out[fi];
    Pose t = chain.base.compose(fg.origin);
    for (const Joint& j : fg.joints) {
      t = t.compose(j.origin);
      fk.origin_w.push_back(t.p);
      fk.axis_w.push_back(t.q * j.axis);
      t = t.compose(Pose{Vector3d::Zero(), quat_exp(j.axis * q[qi++])});
      fk.link_pose.push_back(t);
    }
  }
  return out;
}

Eigen::Matrix3Xd point_jacobian(const FingerFk& fk, int link, const Vector3d& p_world) {
  const int n = static_cast<int>(fk.link_pose.size());
  Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, n);
  for (int k = 0; k <= link; ++k)
    J.col(k) = fk.axis_w[k].cross(p_world - fk.origin_w[k]);
  return J;
}

Eigen::Matrix3Xd point_jacobian_dot_v(const FingerFk& fk, int link, const Vector3d& p_world,
                                      const Eigen::VectorXd& v) {
  const int n = static_cast<int>(fk.link_pose.size());
  const Eigen::Matrix3Xd J = point_jacobian(fk, link, p_world);
  Eigen::Matrix3Xd out = Eigen::Matrix3Xd::Zero(3, n);
  // suffix sums S_l = sum_{k>=l} v_k J_k, prefix sums W_l = sum_{k<l} v_k z_k
  std::vector<Vector3d> suffix(link + 2, Vector3d::Zero());
  for (int k = link; k >= 0; --k) suffix[k] = suffix[k + 1] + v[k] * J.col(k);
  Vector3d W = Vector3d::Zero();
  for (int l = 0; l <= link; ++l) {
    out.col(l) = fk.axis_w[l].cross(suffix[l]) + W.cross(J.col(l));
    W += v[l] * fk.axis_w[l];
  }
  return out;
}

Eigen::MatrixXd point_jacobian_T_f_dq(const FingerFk& fk, int link, const Vector3d& p_world,
                                      const Vector3d& f) {
  const int n = static_cast<int>(fk.link_pose.size());
  const Eigen::Matrix3Xd J = point_jacobian(fk, link, p_world);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k <= link; ++k)
    for (int l = 0; l <= link; ++l) {
      const int a = std::min(k, l), b = std::max(k, l);
      out(k, l) = fk.axis_w[a].cross(J.col(b)).dot(f);
    }
  return out;
}

Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q,
                               const std::vector<FingerFk>& fk) {
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(chain.nq());
  for (size_t fi = 0; fi < chain.fingers.size(); ++fi) {
    const Finger& fg = chain.fingers[fi];
    const int off = chain.finger_offset(static_cast<int>(fi));
    for (size_t li = 0; li < fg.joints.size(); ++li) {
      const LinkInertia& link = li < fg.links.size() ? fg.links[li] : LinkInertia{};
      if (link.mass <= 0) continue;
      const Vector3d com_w = fk[fi].link_pose[li].act(link.com);
      const Eigen::Matrix3Xd J = point_jacobian(fk[fi], static_cast<int>(li), com_w);
      tau.segment(off, J.cols()) += J.transpose() * Vector3d(0, 0, 9.8 * link.mass);
    }
  }
  (void)q;
  return tau;
}

Eigen::MatrixXd gravity_torque_dq(const KinematicChain& chain, const Eigen::VectorXd& q,
                                  const std::vector<FingerFk>& fk) {
  const int n = chain.nq();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (size_t fi = 0; fi < chain.fingers.size(); ++fi) {
    const Finger& fg = chain.fingers[fi];
    const int off = chain.finger_offset(static_cast<int>(fi));
    for (size_t li = 0; li < fg.joints.size(); ++li) {
      const LinkInertia& link = li < fg.links.size() ? fg.links[li] : LinkInertia{};
      if (link.mass <= 0) continue;
      const Vector3d com_w = fk[fi].link_pose[li].act(link.com);
      const Eigen::MatrixXd d =
          point_jacobian_T_f_dq(fk[fi], static_cast<int>(li), com_w,
                                Vector3d(0, 0, 9.8 * link.mass));
      out.block(off, off, d.rows(), d.cols()) += d;
    }
  }
  (void)q;
  return out;
}

namespace {

using nlohmann::json;

Vector3d parse_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected [x, y, z]");
  for (const auto& v : j)
    if (!v.is_number()) throw ConfigError(path, "expected numeric components");
  return Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Pose parse_pose(const json& j, const std::string& path) {
  Pose p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw ConfigError(path, "expected object with p/q");
  if (j.contains("p")) p.p = parse_vec3(j["p"], path + ".p");
  if (j.contains("q")) {
    const auto& q = j["q"];
    if (!q.is_array() || q.size() != 4) throw ConfigError(path + ".q", "expected [w, x, y, z]");
    p.q = Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                      q[3].get<double>());
    if (p.q.norm() < 1e-9) throw ConfigError(path + ".q", "zero quaternion");
    p.q.normalize();
  }
  return p;
}

}  // namespace

KinematicChain load_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open chain file");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }

  KinematicChain chain;
  chain.base = parse_pose(j.value("base", json()), "base");
  if (!j.contains("fingers") || !j["fingers"].is_array() || j["fingers"].empty())
    throw ConfigError("fingers", "expected non-empty array");

  const auto dir = std::filesystem::path(path).parent_path();
  int fi = 0;
  for (const auto& jf : j["fingers"]) {
    const std::string fp = "fingers[" + std::to_string(fi++) + "]";
    Finger f;
    f.name = jf.value("name", fp);
    f.origin = parse_pose(jf.value("origin", json()), fp + ".origin");
    if (!jf.contains("joints") || !jf["joints"].is_array() || jf["joints"].empty())
      throw ConfigError(fp + ".joints", "expected non-empty array");
    int ji = 0;
    for (const auto& jj : jf["joints"]) {
      const std::string jp = fp + ".joints[" + std::to_string(ji++) + "]";
      Joint joint;
      joint.name = jj.value("name", jp);
      joint.origin = parse_pose(jj.value("origin", json()), jp + ".origin");
      if (!jj.contains("axis")) throw ConfigError(jp + ".axis", "missing");
      joint.axis = parse_vec3(jj["axis"], jp + ".axis");
      if (joint.axis.norm() < 1e-9) throw ConfigError(jp + ".axis", "zero axis");
      joint.axis.normalize();
      if (jj.contains("limits")) {
        const auto& lim = jj["limits"];
        if (!lim.is_array() || lim.size() != 2) throw ConfigError(jp + ".limits", "expected [lo, hi]");
        joint.lower = lim[0].get<double>();
        joint.upper = lim[1].get<double>();
        if (joint.lower > joint.upper) throw ConfigError(jp + ".limits", "lo > hi");
      }
      joint.action_limit = jj.value("action_limit", 0.3);
      if (joint.action_limit <= 0) throw ConfigError(jp + ".action_limit", "must be positive");
      f.joints.push_back(joint);
    }
    if (jf.contains("links")) {
      int li = 0;
      for (const auto& jl : jf["links"]) {
        const std::string lp = fp + ".links[" + std::to_string(li++) + "]";
        LinkInertia link;
        link.mass = jl.value("mass", 0.0);
        if (link.mass < 0) throw ConfigError(lp + ".mass", "negative mass");
        if (jl.contains("com")) link.com = parse_vec3(jl["com"], lp + ".com");
        f.links.push_back(link);
      }
      if (f.links.size() != f.joints.size())
        throw ConfigError(fp + ".links", "expected one link per joint");
    }
    if (!jf.contains("tip_mesh") || !jf["tip_mesh"].is_string())
      throw ConfigError(fp + ".tip_mesh", "missing mesh path");
    f.tip_mesh = (dir / jf["tip_mesh"].get<std::string>()).string();
    f.tip_offset = parse_pose(jf.value("tip_offset", json()), fp + ".tip_offset");
    chain.fingers.push_back(std::move(f));
  }
  return chain;
}

}  // namespace rollopt
