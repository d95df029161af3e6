#include "rollopt/contact.hpp"

#include <algorithm>

#include "rollopt/errors.hpp"

namespace rollopt {

Eigen::VectorXd softmin_weights(const Eigen::VectorXd& distances, double delta) {
  const double m = distances.minCoeff();  // tare against overflow
  Eigen::VectorXd w = (-delta * (distances.array() - m)).exp();
  return w / w.sum();
}

double softmin_value(const Eigen::VectorXd& distances, double delta) {
  return softmin_weights(distances, delta).dot(distances);
}

SampledBody sample_fingertips(const KinematicChain& chain, int n_per_finger,
                              uint64_t seed) {
  SampledBody body;
  for (size_t fi = 0; fi < chain.fingers.size(); ++fi) {
    const Finger& fg = chain.fingers[fi];
    const TriangleMesh mesh = load_obj(fg.tip_mesh);
    SampledFinger sf;
    sf.link = static_cast<int>(fg.joints.size()) - 1;
    for (const Vector3d& p : sample_surface(mesh, n_per_finger, seed + fi))
      sf.points.push_back(fg.tip_offset.act(p));
    body.fingers.push_back(std::move(sf));
  }
  return body;
}

ContactEstimate contact_estimate(const FingerFk& fk, int n_joints,
                                 const SampledFinger& body, const SdfScene& scene,
                                 const Pose& o, double delta, EstimateLevel level) {
  const int N = static_cast<int>(body.points.size());
  if (N == 0) throw ConfigError("samples", "empty fingertip sample set");
  const bool grads = level == EstimateLevel::Gradients;

  ContactEstimate est;
  est.link = body.link;
  const Pose& link_pose = fk.link_pose[body.link];

  Eigen::VectorXd phi(N);
  Eigen::MatrixXd pts(3, N);
  Eigen::MatrixXd g(3, N), dphi_dw(3, N);
  std::vector<Matrix3d> H;
  std::vector<Matrix3d> dgdw;
  if (grads) {
    H.resize(N);
    dgdw.resize(N);
  }

  Eigen::VectorXd margins(N);
  for (int j = 0; j < N; ++j) {
    const Vector3d p = link_pose.act(body.points[j]);
    pts.col(j) = p;
    const SdfResult r = scene_sdf(scene, o, p, grads);
    phi[j] = r.phi;
    margins[j] = r.smooth_margin;
    if (grads) {
      g.col(j) = r.dphi_dp;
      dphi_dw.col(j) = r.dphi_dw;
      H[j] = r.d2phi_dp2;
      dgdw[j] = r.dgrad_dw;
    }
  }

  const Eigen::VectorXd h = softmin_weights(phi, delta);
  est.Phi = h.dot(phi);
  est.c = pts * h;

  // weight-aware smoothness margin: kinks carried by negligible weights
  // cannot move the estimate at test tolerance
  {
    double m = 1e30;
    for (int j = 0; j < N; ++j)
      if (h[j] >= 1e-8) m = std::min(m, margins[j]);
    est.smooth_margin = m;
    est.nonsmooth = m < 1e-9;
  }

  if (!grads) {
    // J_c is needed even for residual-only evaluations (rolling, torque)
    est.Jc = Eigen::Matrix3Xd::Zero(3, n_joints);
    Eigen::Matrix3Xd Jj(3, n_joints);
    for (int j = 0; j < N; ++j) {
      if (h[j] < 1e-12) continue;
      Jj = point_jacobian(fk, body.link, pts.col(j));
      est.Jc += h[j] * Jj;
    }
    // values-level normal: weighted argmin-side gradient
    Vector3d nsum = Vector3d::Zero();
    for (int j = 0; j < N; ++j) {
      if (h[j] < 1e-12) continue;
      nsum += h[j] * scene_sdf(scene, o, pts.col(j), true).dphi_dp;
    }
    est.n = nsum.normalized();
    return est;
  }

  est.h = h;
  est.pts_w = pts;
  est.g_w = g;
  est.axis_w = fk.axis_w;
  est.origin_w = fk.origin_w;

  // per-point jacobians and scalar-distance derivatives
  est.Jpts = Eigen::MatrixXd::Zero(3 * N, n_joints);
  Eigen::MatrixXd dphi_dq(n_joints, N);
  for (int j = 0; j < N; ++j) {
    const Eigen::Matrix3Xd Jj = point_jacobian(fk, body.link, pts.col(j));
    est.Jpts.middleRows(3 * j, 3) = Jj;
    dphi_dq.col(j) = Jj.transpose() * g.col(j);
  }

  // dh_j/dv = -delta h_j (dphi_j/dv - sum_k h_k dphi_k/dv)
  const Eigen::VectorXd mean_dq = dphi_dq * h;
  const Vector3d mean_dx = -(g * h);
  const Vector3d mean_dw = dphi_dw * h;
  est.dh_dq.resize(n_joints, N);
  est.dh_dx.resize(3, N);
  est.dh_dw.resize(3, N);
  for (int j = 0; j < N; ++j) {
    est.dh_dq.col(j) = -delta * h[j] * (dphi_dq.col(j) - mean_dq);
    est.dh_dx.col(j) = -delta * h[j] * (-g.col(j) - mean_dx);
    est.dh_dw.col(j) = -delta * h[j] * (dphi_dw.col(j) - mean_dw);
  }

  // Phi = sum h_j phi_j
  est.dPhi_dq = dphi_dq * h + est.dh_dq * phi;
  est.dPhi_dx = mean_dx + est.dh_dx * phi;
  est.dPhi_dw = mean_dw + est.dh_dw * phi;

  // c = sum h_j p_j (p_j independent of the object pose)
  est.dc_dq = Eigen::Matrix3Xd::Zero(3, n_joints);
  est.Jc = Eigen::Matrix3Xd::Zero(3, n_joints);
  for (int j = 0; j < N; ++j) {
    est.dc_dq += pts.col(j) * est.dh_dq.col(j).transpose();
    est.Jc += h[j] * est.Jpts.middleRows(3 * j, 3);
  }
  est.dc_dq += est.Jc;
  est.dc_dx = pts * est.dh_dx.transpose();
  est.dc_dw = pts * est.dh_dw.transpose();

  // n = normalize(sum h_j g_j)
  Vector3d nraw = g * h;
  Eigen::Matrix3Xd dnraw_dq = Eigen::Matrix3Xd::Zero(3, n_joints);
  Matrix3d dnraw_dx = Matrix3d::Zero(), dnraw_dw = Matrix3d::Zero();
  for (int j = 0; j < N; ++j) {
    dnraw_dq += g.col(j) * est.dh_dq.col(j).transpose();
    if (h[j] > 1e-14) dnraw_dq += h[j] * H[j] * est.Jpts.middleRows(3 * j, 3);
    dnraw_dx += g.col(j) * est.dh_dx.col(j).transpose() - h[j] * H[j];
    dnraw_dw += g.col(j) * est.dh_dw.col(j).transpose() + h[j] * dgdw[j];
  }
  const double nn = nraw.norm();
  est.n = nraw / nn;
  const Matrix3d P = (Matrix3d::Identity() - est.n * est.n.transpose()) / nn;
  est.dn_dq = P * dnraw_dq;
  est.dn_dx = P * dnraw_dx;
  est.dn_dw = P * dnraw_dw;
  return est;
}

Eigen::Matrix3Xd ContactEstimate::dJcv_dq(const Eigen::VectorXd& v, bool exact) const {
  const int n = static_cast<int>(dh_dq.rows());
  const int N = static_cast<int>(h.size());
  Eigen::Matrix3Xd out = Eigen::Matrix3Xd::Zero(3, n);
  FingerFk fk;  // minimal view for the exact second-order term
  fk.axis_w = axis_w;
  fk.origin_w = origin_w;
  fk.link_pose.resize(axis_w.size());  // only its size is read
  for (int j = 0; j < N; ++j) {
    const Vector3d Jv = Jpts.middleRows(3 * j, 3) * v;
    out += Jv * dh_dq.col(j).transpose();
    if (exact && h[j] > 1e-12)
      out += h[j] * point_jacobian_dot_v(fk, link, pts_w.col(j), v);
  }
  return out;
}

Matrix3d ContactEstimate::dJcv_dx(const Eigen::VectorXd& v) const {
  Matrix3d out = Matrix3d::Zero();
  for (int j = 0; j < h.size(); ++j)
    out += (Jpts.middleRows(3 * j, 3) * v) * dh_dx.col(j).transpose();
  return out;
}

Matrix3d ContactEstimate::dJcv_dw(const Eigen::VectorXd& v) const {
  Matrix3d out = Matrix3d::Zero();
  for (int j = 0; j < h.size(); ++j)
    out += (Jpts.middleRows(3 * j, 3) * v) * dh_dw.col(j).transpose();
  return out;
}

Eigen::MatrixXd ContactEstimate::dJcTf_dq(const Vector3d& f) const {
  const int n = static_cast<int>(dh_dq.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  FingerFk fk;
  fk.axis_w = axis_w;
  fk.origin_w = origin_w;
  fk.link_pose.resize(axis_w.size());
  for (int j = 0; j < h.size(); ++j) {
    out += (Jpts.middleRows(3 * j, 3).transpose() * f) * dh_dq.col(j).transpose();
    if (h[j] > 1e-12) out += h[j] * point_jacobian_T_f_dq(fk, link, pts_w.col(j), f);
  }
  return out;
}

Eigen::MatrixXd ContactEstimate::dJcTf_dx(const Vector3d& f) const {
  const int n = static_cast<int>(dh_dq.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, 3);
  for (int j = 0; j < h.size(); ++j)
    out += (Jpts.middleRows(3 * j, 3).transpose() * f) * dh_dx.col(j).transpose();
  return out;
}

Eigen::MatrixXd ContactEstimate::dJcTf_dw(const Vector3d& f) const {
  const int n = static_cast<int>(dh_dq.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, 3);
  for (int j = 0; j < h.size(); ++j)
    out += (Jpts.middleRows(3 * j, 3).transpose() * f) * dh_dw.col(j).transpose();
  return out;
}

EnvContactEstimate env_contact_estimate(const std::vector<Vector3d>& object_points,
                                        const Pose& o, const SdfScene& env,
                                        double delta, EstimateLevel level) {
  const int N = static_cast<int>(object_points.size());
  if (N == 0) throw ConfigError("object.samples", "empty object sample set");
  const bool grads = level == EstimateLevel::Gradients;

  const Matrix3d R = o.q.toRotationMatrix();
  Eigen::VectorXd phi(N);
  Eigen::MatrixXd pts(3, N), g(3, N), dphi_dw(3, N);
  std::vector<Matrix3d> H, dp_dw;
  if (grads) {
    H.resize(N);
    dp_dw.resize(N);
  }
  EnvContactEstimate est;
  Eigen::VectorXd margins(N);
  for (int j = 0; j < N; ++j) {
    const Vector3d p = o.act(object_points[j]);
    pts.col(j) = p;
    const SdfResult r = scene_sdf(env, Pose::Identity(), p, grads);
    phi[j] = r.phi;
    margins[j] = r.smooth_margin;
    if (grads) {
      g.col(j) = r.dphi_dp;
      dphi_dw.col(j) = object_points[j].cross(R.transpose() * r.dphi_dp);
      H[j] = r.d2phi_dp2;
      dp_dw[j] = -R * skew(object_points[j]);
    }
  }

  const Eigen::VectorXd h = softmin_weights(phi, delta);
  est.Phi = h.dot(phi);
  est.c = pts * h;
  {
    double m = 1e30;
    for (int j = 0; j < N; ++j)
      if (h[j] >= 1e-8) m = std::min(m, margins[j]);
    est.smooth_margin = m;
    est.nonsmooth = m < 1e-9;
  }
  if (!grads) {
    Vector3d nsum = Vector3d::Zero();
    for (int j = 0; j < N; ++j)
      if (h[j] > 1e-12) nsum += h[j] * scene_sdf(env, Pose::Identity(), pts.col(j), true).dphi_dp;
    est.n = nsum.normalized();
    return est;
  }

  Eigen::MatrixXd dh_dx(3, N), dh_dw(3, N);
  const Vector3d mean_dx = g * h;
  const Vector3d mean_dw = dphi_dw * h;
  for (int j = 0; j < N; ++j) {
    dh_dx.col(j) = -delta * h[j] * (g.col(j) - mean_dx);
    dh_dw.col(j) = -delta * h[j] * (dphi_dw.col(j) - mean_dw);
  }

  est.dPhi_dx = mean_dx + dh_dx * phi;
  est.dPhi_dw = mean_dw + dh_dw * phi;

  est.dc_dx = Matrix3d::Identity() + pts * dh_dx.transpose();
  est.dc_dw = pts * dh_dw.transpose();
  Vector3d nraw = Vector3d::Zero();
  Matrix3d dnraw_dx = Matrix3d::Zero(), dnraw_dw = Matrix3d::Zero();
  for (int j = 0; j < N; ++j) {
    nraw += h[j] * g.col(j);
    est.dc_dw += h[j] * dp_dw[j];
    dnraw_dx += g.col(j) * dh_dx.col(j).transpose() + h[j] * H[j];
    dnraw_dw += g.col(j) * dh_dw.col(j).transpose() + h[j] * H[j] * dp_dw[j];
  }
  const double nn = nraw.norm();
  est.n = nraw / nn;
  const Matrix3d P = (Matrix3d::Identity() - est.n * est.n.transpose()) / nn;
  est.dn_dx = P * dnraw_dx;
  est.dn_dw = P * dnraw_dw;
  return est;
}

}  // namespace rollopt
