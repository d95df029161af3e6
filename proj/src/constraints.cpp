#include "rollopt/constraints.hpp"

#include <cmath>
#include <stdexcept>

#include "rollopt/so3.hpp"

namespace rollopt {

namespace {

constexpr double kNormEps = 1e-6;

// scatter a finger-local (rows x nj) block into (rows x nq) at `off`
Eigen::MatrixXd embed_cols(const Eigen::MatrixXd& local, int nq, int off) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(local.rows(), nq);
  out.middleCols(off, local.cols()) = local;
  return out;
}

Eigen::MatrixXd hcat6(const Eigen::MatrixXd& dx, const Eigen::MatrixXd& dw) {
  Eigen::MatrixXd out(dx.rows(), 6);
  out.leftCols(3) = dx;
  out.rightCols(3) = dw;
  return out;
}

}  // namespace

Eigen::Matrix<double, 2, 3> tangent_basis_2d(const Vector3d& n) {
  if (n.norm() < 1e-12) throw std::invalid_argument("tangent basis of a zero normal");
  int least = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[least])) least = i;
  Vector3d e = Vector3d::Zero();
  e[least] = 1.0;
  const Vector3d t1 = (e - e.dot(n) * n).normalized();
  const Vector3d t2 = n.cross(t1);
  Eigen::Matrix<double, 2, 3> R;
  R.row(0) = t1.transpose();
  R.row(1) = t2.transpose();
  return R;
}

ConstraintEval contact_constraint(const ContactEstimate& est, int nq, int off,
                                  bool with_grads) {
  ConstraintEval ev;
  ev.r = Eigen::VectorXd::Constant(1, est.Phi);
  if (!with_grads) return ev;
  ev.dq_t = embed_cols(est.dPhi_dq.transpose(), nq, off);
  ev.do_t = hcat6(est.dPhi_dx.transpose(), est.dPhi_dw.transpose());
  return ev;
}

ConstraintEval rolling_constraint(const ContactEstimate& est, int nq, int off,
                                  const Eigen::VectorXd& q_t, const Eigen::VectorXd& q_t1,
                                  const Pose& o_t, const Pose& o_t1, double dt,
                                  bool exact_q_block, bool with_grads) {
  const int nj = static_cast<int>(est.Jc.cols());
  const Eigen::VectorXd dq = q_t1.segment(off, nj) - q_t.segment(off, nj);
  const AngularVelocity av = angular_velocity(o_t.q, o_t1.q, dt);
  const Vector3d r = est.c - o_t.p;
  const Vector3d xdot = (o_t1.p - o_t.p) / dt;
  const Eigen::Matrix<double, 2, 3> R = tangent_basis_2d(est.n);

  const Vector3d vel = est.Jc * dq / dt - av.omega.cross(r) - xdot;

  ConstraintEval ev;
  ev.r = R * vel;
  if (!with_grads) return ev;

  const Matrix3d omega_x = skew(av.omega);
  // d(-omega x r)/d omega = +[r]x, times d omega/d(tangent) = dphi/dt
  const Matrix3d r_x = skew(r);

  // The basis itself turns with the contact normal, so the anchor-state
  // blocks also carry velT * dR/dn * dn/d(anchor). Reconstruct t1 = proj of
  // the picked axis, t2 = n x t1, and differentiate at fixed axis pick.
  Eigen::Matrix<double, 2, 3> D;
  {
    int least = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(est.n[i]) < std::abs(est.n[least])) least = i;
    Vector3d e = Vector3d::Zero();
    e[least] = 1.0;
    const Vector3d w = e - e.dot(est.n) * est.n;
    const Vector3d t1 = w.normalized();
    const Matrix3d dt1_dn = (Matrix3d::Identity() - t1 * t1.transpose()) *
                            (-(est.n * e.transpose() +
                               e.dot(est.n) * Matrix3d::Identity())) /
                            w.norm();
    const Matrix3d dt2_dn = -skew(t1) + skew(est.n) * dt1_dn;
    D.row(0) = vel.transpose() * dt1_dn;
    D.row(1) = vel.transpose() * dt2_dn;
  }

  ev.dq_t1 = embed_cols(R * est.Jc / dt, nq, off);
  ev.dq_t = embed_cols(
      R * (est.dJcv_dq(dq, exact_q_block) / dt - est.Jc / dt - omega_x * est.dc_dq) +
          D * est.dn_dq,
      nq, off);
  ev.do_t = hcat6(R * (est.dJcv_dx(dq) / dt - omega_x * (est.dc_dx - Matrix3d::Identity()) +
                       Matrix3d::Identity() / dt) +
                      D * est.dn_dx,
                  R * (est.dJcv_dw(dq) / dt + r_x * av.dphi_dw_t / dt - omega_x * est.dc_dw) +
                      D * est.dn_dw);
  ev.do_t1 = hcat6(Eigen::MatrixXd(-R / dt), Eigen::MatrixXd(R * r_x * av.dphi_dw_t1 / dt));
  return ev;
}

ConstraintEval torque_balance(const KinematicChain& chain,
                              const std::vector<FingerFk>& fk,
                              const std::vector<ContactEstimate>& est,
                              const Eigen::VectorXd& q_t, const Eigen::VectorXd& q_t1,
                              const Eigen::VectorXd& u, const std::vector<Vector3d>& f,
                              const Eigen::VectorXd& kp, bool with_grads) {
  const int nq = chain.nq();
  const int nf = static_cast<int>(chain.fingers.size());

  ConstraintEval ev;
  ev.r = kp.asDiagonal() * (q_t1 - q_t - u) - gravity_torque(chain, q_t, fk);
  if (!with_grads) {
    for (int i = 0; i < nf; ++i) {
      const int off = chain.finger_offset(i);
      const int nj = static_cast<int>(chain.fingers[i].joints.size());
      ev.r.segment(off, nj) += est[i].Jc.transpose() * f[i];
    }
    return ev;
  }
  const Eigen::MatrixXd Kp = kp.asDiagonal();
  ev.dq_t1 = Kp;
  ev.du_t = -Kp;
  ev.dq_t = -Kp - gravity_torque_dq(chain, q_t, fk);
  ev.do_t = Eigen::MatrixXd::Zero(nq, 6);
  ev.df.resize(nf);
  for (int i = 0; i < nf; ++i) {
    const int off = chain.finger_offset(i);
    const int nj = static_cast<int>(chain.fingers[i].joints.size());
    ev.r.segment(off, nj) += est[i].Jc.transpose() * f[i];
    ev.dq_t.middleCols(off, nj).middleRows(off, nj) += est[i].dJcTf_dq(f[i]);
    ev.do_t.middleRows(off, nj) += hcat6(est[i].dJcTf_dx(f[i]), est[i].dJcTf_dw(f[i]));
    ev.df[i] = Eigen::MatrixXd::Zero(nq, 3);
    ev.df[i].middleRows(off, nj) = est[i].Jc.transpose();
  }
  return ev;
}

ConstraintEval wrench_balance(const std::vector<ContactEstimate>& est, int nq,
                              const std::vector<int>& off,
                              const std::vector<Vector3d>& f, const Vector3d& f_e,
                              const EnvArm* env_arm, double mass,
                              const Vector3d& com_body, const Pose& o_t,
                              const Pose& o_t1, const ObjectModel& model,
                              bool with_grads) {
  if (env_arm == nullptr && f_e.norm() > 0)
    throw std::invalid_argument("environment force given without a contact arm");
  const int nf = static_cast<int>(est.size());
  const Vector3d g(0, 0, 9.8);
  const Matrix3d R1 = o_t1.q.toRotationMatrix();
  const Vector3d rc = R1 * com_body;  // CoM offset at the next orientation

  ConstraintEval ev;
  ev.df.resize(nf);

  if (!with_grads) {
    // residual-only path; kept in lockstep with the gradient path below by a
    // dedicated equality test
    if (model.type == JointType::Free) {
      ev.r = Eigen::VectorXd::Zero(6);
      ev.r.head<3>() = f_e - mass * g;
      ev.r.tail<3>() =
          f_e.cross(env_arm ? Vector3d(env_arm->c - o_t.p) : Vector3d::Zero()) -
          mass * rc.cross(g);
      for (int i = 0; i < nf; ++i) {
        ev.r.head<3>() += f[i];
        ev.r.tail<3>() += f[i].cross(Vector3d(est[i].c - o_t.p));
      }
    } else {
      Eigen::VectorXd W = Eigen::VectorXd::Zero(6);
      W.head<3>() = f_e - mass * g;
      W.tail<3>() = (o_t.p + rc).cross(Vector3d(-mass * g));
      if (env_arm) W.tail<3>() += env_arm->c.cross(f_e);
      for (int i = 0; i < nf; ++i) {
        W.head<3>() += f[i];
        W.tail<3>() += est[i].c.cross(f[i]);
      }
      ev.r = model.wrench_projection() * W;
    }
    return ev;
  }

  if (model.type == JointType::Free) {
    ev.r = Eigen::VectorXd::Zero(6);
    ev.r.head<3>() = f_e - mass * g;
    ev.r.tail<3>() = f_e.cross(env_arm ? Vector3d(env_arm->c - o_t.p) : Vector3d::Zero()) -
                     mass * rc.cross(g);
    ev.dq_t = Eigen::MatrixXd::Zero(6, nq);
    ev.do_t = Eigen::MatrixXd::Zero(6, 6);
    ev.do_t1 = Eigen::MatrixXd::Zero(6, 6);
    ev.dfe = Eigen::MatrixXd::Zero(6, 3);
    ev.dfe.topRows(3) = Matrix3d::Identity();
    // com term: d(-m (R1 Exp(w) cb) x g)/dw = -m [g]x R1 [cb]x
    ev.do_t1.bottomRightCorner(3, 3) = -mass * skew(g) * R1 * skew(com_body);
    if (env_arm) {
      const Vector3d re = env_arm->c - o_t.p;
      ev.dfe.bottomRows(3) = -skew(re);
      // d(f_e x re)/d re = [f_e]x; re = c_e - x_t
      ev.do_t.bottomRows(3) +=
          hcat6(skew(f_e) * (env_arm->dc_dx - Matrix3d::Identity()), skew(f_e) * env_arm->dc_dw);
    }
    for (int i = 0; i < nf; ++i) {
      const Vector3d ri = est[i].c - o_t.p;
      ev.r.head<3>() += f[i];
      ev.r.tail<3>() += f[i].cross(ri);
      ev.df[i] = Eigen::MatrixXd::Zero(6, 3);
      ev.df[i].topRows(3) = Matrix3d::Identity();
      ev.df[i].bottomRows(3) = -skew(ri);
      const int nj = static_cast<int>(est[i].Jc.cols());
      ev.dq_t.bottomRows(3).middleCols(off[i], nj) += skew(f[i]) * est[i].dc_dq;
      ev.do_t.bottomRows(3) += hcat6(skew(f[i]) * (est[i].dc_dx - Matrix3d::Identity()),
                                     skew(f[i]) * est[i].dc_dw);
    }
    return ev;
  }

  // Jointed object: net wrench about the world origin (conventional torque
  // r x f and gravity acting downward at the CoM), projected to the rows the
  // joint cannot react. The two formulations share their zero set for the
  // free case when the object origin sits at the CoM.
  const Eigen::MatrixXd P = model.wrench_projection();
  Eigen::VectorXd W = Eigen::VectorXd::Zero(6);
  W.head<3>() = f_e - mass * g;
  const Vector3d com_w = o_t.p + rc;
  W.tail<3>() = com_w.cross(Vector3d(-mass * g));
  if (env_arm) W.tail<3>() += env_arm->c.cross(f_e);

  Eigen::MatrixXd dW_dq = Eigen::MatrixXd::Zero(6, nq);
  Eigen::MatrixXd dW_do = Eigen::MatrixXd::Zero(6, 6);
  Eigen::MatrixXd dW_do1 = Eigen::MatrixXd::Zero(6, 6);
  Eigen::MatrixXd dW_dfe = Eigen::MatrixXd::Zero(6, 3);
  dW_dfe.topRows(3) = Matrix3d::Identity();
  if (env_arm) {
    dW_dfe.bottomRows(3) = skew(env_arm->c);
    // d(c_e x f_e)/d c_e = -[f_e]x
    dW_do.bottomRows(3) += hcat6(-skew(f_e) * env_arm->dc_dx, -skew(f_e) * env_arm->dc_dw);
  }
  // d(com x (-m g))/d com = +[m g]x ; com = x_t + R1 Exp(w) cb
  dW_do.bottomLeftCorner(3, 3) += mass * skew(g);
  dW_do1.bottomRightCorner(3, 3) += mass * skew(g) * (-R1 * skew(com_body));

  std::vector<Eigen::MatrixXd> dW_df(nf);
  for (int i = 0; i < nf; ++i) {
    W.head<3>() += f[i];
    W.tail<3>() += est[i].c.cross(f[i]);
    dW_df[i] = Eigen::MatrixXd::Zero(6, 3);
    dW_df[i].topRows(3) = Matrix3d::Identity();
    dW_df[i].bottomRows(3) = skew(est[i].c);
    const int nj = static_cast<int>(est[i].Jc.cols());
    dW_dq.bottomRows(3).middleCols(off[i], nj) += -skew(f[i]) * est[i].dc_dq;
    dW_do.bottomRows(3) += hcat6(-skew(f[i]) * est[i].dc_dx, -skew(f[i]) * est[i].dc_dw);
  }

  ev.r = P * W;
  ev.dq_t = P * dW_dq;
  ev.do_t = P * dW_do;
  ev.do_t1 = P * dW_do1;
  ev.dfe = P * dW_dfe;
  for (int i = 0; i < nf; ++i) ev.df[i] = P * dW_df[i];
  return ev;
}

ConstraintEval friction_cone(const Vector3d& f, const Vector3d& n, double mu,
                             int finger, int n_fingers, bool with_grads) {
  const Eigen::Matrix<double, 2, 3> T = tangent_basis_2d(n);
  Eigen::Matrix<double, 5, 3> A;
  A.row(0) = T.row(0) - mu * n.transpose();
  A.row(1) = -T.row(0) - mu * n.transpose();
  A.row(2) = T.row(1) - mu * n.transpose();
  A.row(3) = -T.row(1) - mu * n.transpose();
  A.row(4) = -n.transpose();

  ConstraintEval ev;
  ev.equality = false;
  ev.r = A * f;
  if (!with_grads) return ev;
  ev.df.resize(n_fingers);
  ev.df[finger] = A;
  return ev;
}

ConstraintEval friction_cone(const ContactEstimate& est, int nq, int off,
                             const Vector3d& f, double mu, int finger,
                             int n_fingers, bool with_grads) {
  ConstraintEval ev = friction_cone(f, est.n, mu, finger, n_fingers, with_grads);
  if (!with_grads) return ev;

  // The contact frame rotates with the estimated normal, so the rows also
  // depend on the state through n(q_t, o_t). With t1 = u/|u|, u = e - (e.n)n
  // for the fixed pick axis e, and t2 = n x t1:
  const Vector3d n = est.n;
  int least = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[least])) least = i;
  Vector3d e = Vector3d::Zero();
  e[least] = 1.0;
  const Vector3d u = e - e.dot(n) * n;
  const double un = u.norm();
  const Vector3d t1 = u / un;
  const Matrix3d du_dn = -(n * e.transpose() + e.dot(n) * Matrix3d::Identity());
  const Matrix3d dt1_dn = (Matrix3d::Identity() - t1 * t1.transpose()) * du_dn / un;
  const Matrix3d dt2_dn = -skew(t1) + skew(n) * dt1_dn;

  Eigen::Matrix<double, 5, 3> D;  // d r / d n
  const Eigen::RowVector3d f1 = f.transpose() * dt1_dn;
  const Eigen::RowVector3d f2 = f.transpose() * dt2_dn;
  const Eigen::RowVector3d fm = mu * f.transpose();
  D.row(0) = f1 - fm;
  D.row(1) = -f1 - fm;
  D.row(2) = f2 - fm;
  D.row(3) = -f2 - fm;
  D.row(4) = -f.transpose();
  ev.dq_t = embed_cols(D * est.dn_dq, nq, off);
  ev.do_t = hcat6(D * est.dn_dx, D * est.dn_dw);
  return ev;
}

ConstraintEval min_force(const Vector3d& f, double f_min, int finger, int n_fingers,
                         bool with_grads) {
  const double norm = std::sqrt(f.squaredNorm() + kNormEps * kNormEps);
  ConstraintEval ev;
  ev.equality = false;
  ev.r = Eigen::VectorXd::Constant(1, f_min - norm);
  if (!with_grads) return ev;
  ev.df.resize(n_fingers);
  ev.df[finger] = -f.transpose() / norm;
  return ev;
}

ConstraintEval env_contact_constraint(const EnvContactEstimate& est,
                                      bool with_grads) {
  ConstraintEval ev;
  ev.r = Eigen::VectorXd::Constant(1, est.Phi);
  if (!with_grads) return ev;
  ev.do_t = hcat6(est.dPhi_dx.transpose(), est.dPhi_dw.transpose());
  return ev;
}

ConstraintEval region_constraint(const ContactEstimate& est, int nq, int off,
                                 const Pose& o, const Vector3d& anchor_body, double h,
                                 bool with_grads) {
  const Vector3d d = est.c - o.act(anchor_body);
  const double norm = std::sqrt(d.squaredNorm() + kNormEps * kNormEps);
  const Vector3d dhat = d / norm;
  const Matrix3d R = o.q.toRotationMatrix();

  ConstraintEval ev;
  ev.equality = false;
  ev.r = Eigen::VectorXd::Constant(1, norm - h);
  if (!with_grads) return ev;
  ev.dq_t = embed_cols(dhat.transpose() * est.dc_dq, nq, off);
  // d d/dx = dc_dx - I; d d/dw = dc_dw + R [anchor]x
  ev.do_t = hcat6(dhat.transpose() * (est.dc_dx - Matrix3d::Identity()),
                  dhat.transpose() * (est.dc_dw + R * skew(anchor_body)));
  return ev;
}

ConstraintEval tracking_constraint(const FingerFk& fk, const Finger& finger,
                                   int nq, int off, const Pose& o,
                                   const Vector3d& p_hat_body, bool with_grads) {
  const int last = static_cast<int>(finger.joints.size()) - 1;
  const Vector3d tip = fk.link_pose[last].act(finger.tip_offset.p);
  const Matrix3d R = o.q.toRotationMatrix();

  ConstraintEval ev;
  ev.r = tip - o.act(p_hat_body);
  if (!with_grads) return ev;
  ev.dq_t = embed_cols(point_jacobian(fk, last, tip), nq, off);
  ev.do_t = hcat6(-Matrix3d::Identity(), R * skew(p_hat_body));
  return ev;
}

}  // namespace rollopt
