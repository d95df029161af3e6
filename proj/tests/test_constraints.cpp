#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rollopt/constraints.hpp"
#include "rollopt/so3.hpp"
#include "support/finite_diff.hpp"
#include "support/fixtures.hpp"

using namespace rollopt;
using namespace rollopt::testing;

namespace {

SdfScene box_scene(const Vector3d& half) {
  SdfScene s;
  s.prims.push_back(Primitive{PrimitiveKind::Box, half, Pose::Identity()});
  return s;
}

SdfScene plane_scene() {
  // thick slab whose top face is z=0
  SdfScene s;
  s.prims.push_back(Primitive{PrimitiveKind::Box, Vector3d(5, 5, 0.5),
                              Pose{Vector3d(0, 0, -0.5), Quaterniond::Identity()}});
  return s;
}

SampledFinger cluster_finger(int link, const Vector3d& around, int n, uint64_t seed,
                             double sigma = 0.002) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  SampledFinger sf;
  sf.link = link;
  for (int j = 0; j < n; ++j)
    sf.points.push_back(around + Vector3d(g(rng), g(rng), g(rng)));
  return sf;
}

Pose rand_pose(std::mt19937_64& rng, double pos_scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose o;
  o.p = pos_scale * Vector3d(u(rng), u(rng), u(rng));
  o.q = Quaterniond(u(rng) + 1.5, u(rng), u(rng), u(rng)).normalized();
  return o;
}

Vector3d rand_vec(std::mt19937_64& rng, double s) {
  std::normal_distribution<double> g(0.0, s);
  return Vector3d(g(rng), g(rng), g(rng));
}

}  // namespace

TEST_CASE("tangent basis is orthonormal and kills the normal") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 200; ++it) {
    const Vector3d n = rand_vec(rng, 1.0).normalized();
    const auto R = tangent_basis_2d(n);
    CHECK((R * R.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    CHECK((R * n).norm() < 1e-12);
    const Vector3d v = rand_vec(rng, 2.0);
    CHECK((R * v).squaredNorm() + std::pow(n.dot(v), 2) ==
          doctest::Approx(v.squaredNorm()).epsilon(1e-12));
  }
  const auto Rz = tangent_basis_2d(Vector3d::UnitZ());
  CHECK(std::abs(Rz.row(0)[2]) < 1e-12);
  CHECK(std::abs(Rz.row(1)[2]) < 1e-12);
  CHECK_THROWS_AS(tangent_basis_2d(Vector3d::Zero()), std::invalid_argument);
}

TEST_CASE("contact constraint embeds the estimate gradients") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(7);
  const Eigen::VectorXd q = rand_config(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const SdfScene scene = box_scene(Vector3d(0.02, 0.02, 0.05));
  const Pose o = rand_pose(rng, 0.1);
  const SampledFinger body = cluster_finger(2, Vector3d(0.05, 0, 0), 8, 11);
  const int nj = 3, off = chain.finger_offset(1);
  const auto est = contact_estimate(fk[1], nj, body, scene, o, 400.0,
                                    EstimateLevel::Gradients);
  const auto ev = contact_constraint(est, chain.nq(), off);
  CHECK(ev.r.size() == 1);
  CHECK(ev.r[0] == est.Phi);
  CHECK(ev.equality);
  CHECK(ev.dq_t.cols() == chain.nq());
  CHECK((ev.dq_t.middleCols(off, nj).transpose() - est.dPhi_dq).norm() == 0.0);
  CHECK(ev.dq_t.leftCols(off).norm() == 0.0);
  CHECK((ev.do_t.leftCols(3).transpose() - est.dPhi_dx).norm() == 0.0);
  CHECK((ev.do_t.rightCols(3).transpose() - est.dPhi_dw).norm() == 0.0);
}

TEST_CASE("rolling residual vanishes for a wheel rolling on a spinning plane") {
  KinematicChain chain;
  const double Ra = 0.2, rs = 0.04;
  chain.fingers.push_back(wheel_finger(Ra, rs));
  const SdfScene plane = plane_scene();

  const double dt = 1e-3;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 20; ++it) {
    const double q1 = u(rng), q2 = 3 * u(rng);
    const double w1 = u(rng), Omega = u(rng);
    const double w2 = (Omega - w1) * Ra / rs;

    Eigen::VectorXd q_t(2), q_t1(2);
    q_t << q1, q2;
    q_t1 << q1 + w1 * dt, q2 + w2 * dt;
    Pose o_t;  // plane spun about z by some accumulated angle
    o_t.q = quat_exp(Vector3d(0, 0, 0.3 * u(rng)));
    Pose o_t1 = o_t;
    o_t1.q = (quat_exp(Vector3d(0, 0, Omega * dt)) * o_t.q).normalized();

    SampledFinger body;
    body.link = 1;
    body.points.push_back(wheel_contact_point(rs, q2));
    const auto fk = forward_kinematics(chain, q_t);
    const auto est = contact_estimate(fk[0], 2, body, plane, o_t, 1000.0,
                                      EstimateLevel::Gradients);
    CHECK(std::abs(est.Phi) < 1e-12);  // grazing contact by construction

    const auto ev = rolling_constraint(est, 2, 0, q_t, q_t1, o_t, o_t1, dt);
    CHECK(ev.r.norm() < 1e-9);

    // injected tangential slip appears at full magnitude
    const double v_slip = 0.01 + 0.2 * std::abs(u(rng));
    Eigen::VectorXd q_slip = q_t1;
    q_slip[1] += (v_slip / rs) * dt;
    const auto ev2 = rolling_constraint(est, 2, 0, q_t, q_slip, o_t, o_t1, dt);
    CHECK(ev2.r.norm() == doctest::Approx(v_slip).epsilon(1e-6));
  }
}

TEST_CASE("rolling residual is homogeneous in the step and affine overall") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(17);
  const Eigen::VectorXd q = rand_config(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const SdfScene scene = box_scene(Vector3d(0.03, 0.03, 0.03));
  const Pose o = rand_pose(rng, 0.08);
  const SampledFinger body = cluster_finger(1, Vector3d(0.11, 0, 0), 6, 19);
  const int off = chain.finger_offset(0);
  const auto est = contact_estimate(fk[0], 2, body, scene, o, 400.0,
                                    EstimateLevel::Gradients);

  // same orientation at both ends: the residual is linear in the step
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(chain.nq());
  dq.segment(off, 2) = Eigen::Vector2d(0.02, -0.013);
  const Vector3d dx(0.003, -0.001, 0.002);
  Pose o1 = o;
  o1.p += dx;
  const auto r1 = rolling_constraint(est, chain.nq(), off, q, q + dq, o, o1, 0.1).r;
  Pose o2 = o;
  o2.p += 2 * dx;
  const auto r2 = rolling_constraint(est, chain.nq(), off, q, q + 2 * dq, o, o2, 0.1).r;
  CHECK((r2 - 2 * r1).norm() < 1e-12);

  // with a rotating object the residual is still affine in (q_{t+1}, x_{t+1})
  Pose o1r = o1;
  o1r.q = quat_retract(o.q, Vector3d(0.01, -0.02, 0.015));
  const auto ev = rolling_constraint(est, chain.nq(), off, q, q + dq, o, o1r, 0.1);
  Eigen::VectorXd dq2 = Eigen::VectorXd::Zero(chain.nq());
  dq2.segment(off, 2) = Eigen::Vector2d(-0.007, 0.021);
  const Vector3d dx2(0.001, 0.004, -0.002);
  Pose o1r2 = o1r;
  o1r2.p += dx2;
  const auto ev2 = rolling_constraint(est, chain.nq(), off, q, q + dq + dq2, o, o1r2, 0.1);
  const Eigen::VectorXd predicted =
      ev.r + ev.dq_t1 * dq2 + ev.do_t1.leftCols(3) * dx2;
  CHECK((ev2.r - predicted).norm() < 1e-12);
}

TEST_CASE("rolling constraint Jacobians match finite differences") {
  KinematicChain chain = two_finger_chain();
  const SdfScene box = box_scene(Vector3d(0.04, 0.05, 0.04));
  std::mt19937_64 rng(23);
  const double dt = 0.1;

  int tested = 0;
  for (int it = 0; it < 40 && tested < 12; ++it) {
    const int fi = it % 2;
    const int nj = static_cast<int>(chain.fingers[fi].joints.size());
    const int off = chain.finger_offset(fi);
    const Eigen::VectorXd q = rand_config(chain, rng);
    const auto fk = forward_kinematics(chain, q);
    const SampledFinger body =
        cluster_finger(nj - 1, Vector3d(0.1, 0.005, -0.005), 7, 600 + it);

    // park the object so the cluster sits near (but not on) a box face,
    // keeping every sample's nearest feature the same flat face
    const Vector3d tip = fk[fi].link_pose[nj - 1].act(body.points[0]);
    Pose o;
    o.p = tip + Vector3d(0.0438, 0.0012, -0.0007);
    o.q = quat_exp(Vector3d(0.02, -0.015, 0.03));

    const auto est = contact_estimate(fk[fi], nj, body, box, o, 400.0,
                                      EstimateLevel::Gradients);
    if (est.smooth_margin < 1e-3 || std::abs(est.Phi) > 0.05) continue;
    ++tested;

    // small physically-plausible step
    Eigen::VectorXd q1 = q;
    for (int i = 0; i < nj; ++i) q1[off + i] += 0.002 * std::sin(17.0 * (it + i));
    Pose o1 = o;
    o1.p += Vector3d(0.0005, -0.0003, 0.0004);
    o1.q = quat_retract(o.q, Vector3d(0.004, 0.003, -0.005));

    auto eval = [&](const Eigen::VectorXd& qa, const Eigen::VectorXd& qb,
                    const Pose& oa, const Pose& ob, bool exact) {
      const auto fka = forward_kinematics(chain, qa);
      const auto e = contact_estimate(fka[fi], nj, body, box, oa, 400.0,
                                      EstimateLevel::Gradients);
      return rolling_constraint(e, chain.nq(), off, qa, qb, oa, ob, dt, exact);
    };

    const auto ev = eval(q, q1, o, o1, true);

    // exact second-order q_t block: flat-face contact keeps the frame fixed
    CHECK(rel_err(ev.dq_t, num_jac([&](const Eigen::VectorXd& qq) {
            return eval(qq, q1, o, o1, true).r;
          }, q)) < 2e-5);
    CHECK(rel_err(ev.dq_t1, num_jac([&](const Eigen::VectorXd& qq) {
            return eval(q, qq, o, o1, true).r;
          }, q1)) < 2e-5);
    // o_t position block is exact on a flat face; the orientation block
    // inherits the locally-constant contact frame (rotating the object
    // rotates n), so it only gets the documented looser budget
    const Eigen::MatrixXd do_fd = num_jac_pose([&](const Pose& oo) {
      return eval(q, q1, oo, o1, true).r;
    }, o);
    CHECK(rel_err(ev.do_t.leftCols(3), do_fd.leftCols(3)) < 2e-5);
    CHECK(rel_err(ev.do_t, do_fd) < 1e-2);
    CHECK(rel_err(ev.do_t1, num_jac_pose([&](const Pose& oo) {
            return eval(q, q1, o, oo, true).r;
          }, o1)) < 2e-5);

    // weights-only q_t block stays within the documented looser budget
    const auto approx = eval(q, q1, o, o1, false);
    CHECK(rel_err(approx.dq_t, num_jac([&](const Eigen::VectorXd& qq) {
            return eval(qq, q1, o, o1, false).r;
          }, q)) < 1e-2);
  }
  CHECK(tested >= 12);
}

TEST_CASE("torque balance zero cases and direct recomputation") {
  KinematicChain chain = two_finger_chain();
  for (auto& fg : chain.fingers)
    for (auto& l : fg.links) l.mass = 0.0;
  std::mt19937_64 rng(29);
  const int nq = chain.nq();
  const Eigen::VectorXd q = rand_config(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const Eigen::VectorXd kp = Eigen::VectorXd::Constant(nq, 3.0);

  const SdfScene scene = box_scene(Vector3d(0.03, 0.03, 0.03));
  const Pose o = rand_pose(rng, 0.1);
  std::vector<ContactEstimate> est;
  est.push_back(contact_estimate(fk[0], 2, cluster_finger(1, Vector3d(0.11, 0, 0), 5, 31),
                                 scene, o, 400.0, EstimateLevel::Gradients));
  est.push_back(contact_estimate(fk[1], 3, cluster_finger(2, Vector3d(0.14, 0, 0), 5, 37),
                                 scene, o, 400.0, EstimateLevel::Gradients));

  SUBCASE("massless, forceless, command tracked exactly") {
    const Eigen::VectorXd u = rand_config(chain, rng, 0.02);
    const std::vector<Vector3d> f = {Vector3d::Zero(), Vector3d::Zero()};
    const auto ev = torque_balance(chain, fk, est, q, q + u, u, f, kp);
    CHECK(ev.r.norm() < 1e-14);
  }

  SUBCASE("massless with forces: residual zero iff the command absorbs J^T f") {
    const Eigen::VectorXd u = rand_config(chain, rng, 0.02);
    const std::vector<Vector3d> f = {rand_vec(rng, 0.5), rand_vec(rng, 0.5)};
    Eigen::VectorXd jtf = Eigen::VectorXd::Zero(nq);
    jtf.segment(0, 2) = est[0].Jc.transpose() * f[0];
    jtf.segment(2, 3) = est[1].Jc.transpose() * f[1];
    const Eigen::VectorXd q1 = q + u - kp.cwiseInverse().asDiagonal() * jtf;
    const auto ev = torque_balance(chain, fk, est, q, q1, u, f, kp);
    CHECK(ev.r.norm() < 1e-13);
  }

  SUBCASE("random instance matches a naive recomputation") {
    KinematicChain heavy = two_finger_chain();  // nonzero link masses
    const auto fkh = forward_kinematics(heavy, q);
    const Eigen::VectorXd u = rand_config(heavy, rng, 0.02);
    const Eigen::VectorXd q1 = q + rand_config(heavy, rng, 0.05);
    const std::vector<Vector3d> f = {rand_vec(rng, 0.5), rand_vec(rng, 0.5)};
    const auto ev = torque_balance(heavy, fkh, est, q, q1, u, f, kp);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(nq);
    for (int i = 0; i < nq; ++i) manual[i] = kp[i] * (q1[i] - q[i] - u[i]);
    manual -= gravity_torque(heavy, q, fkh);
    manual.segment(0, 2) += est[0].Jc.transpose() * f[0];
    manual.segment(2, 3) += est[1].Jc.transpose() * f[1];
    CHECK((ev.r - manual).norm() < 1e-12);
  }
}

TEST_CASE("torque balance Jacobians match finite differences") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(41);
  const int nq = chain.nq();
  const Eigen::VectorXd kp = Eigen::VectorXd::Constant(nq, 3.0);
  const SdfScene scene = box_scene(Vector3d(0.04, 0.04, 0.04));

  const Eigen::VectorXd q = rand_config(chain, rng);
  const Eigen::VectorXd q1 = q + rand_config(chain, rng, 0.03);
  const Eigen::VectorXd u = rand_config(chain, rng, 0.02);
  const std::vector<Vector3d> f = {rand_vec(rng, 0.4), rand_vec(rng, 0.4)};
  const Pose o = rand_pose(rng, 0.09);

  auto ests = [&](const Eigen::VectorXd& qq, const Pose& oo) {
    const auto fkq = forward_kinematics(chain, qq);
    std::vector<ContactEstimate> e;
    e.push_back(contact_estimate(fkq[0], 2, cluster_finger(1, Vector3d(0.11, 0, 0), 5, 43),
                                 scene, oo, 400.0, EstimateLevel::Gradients));
    e.push_back(contact_estimate(fkq[1], 3, cluster_finger(2, Vector3d(0.14, 0, 0), 5, 47),
                                 scene, oo, 400.0, EstimateLevel::Gradients));
    return e;
  };
  auto eval = [&](const Eigen::VectorXd& qa, const Eigen::VectorXd& qb,
                  const Eigen::VectorXd& uu, const std::vector<Vector3d>& ff,
                  const Pose& oo) {
    return torque_balance(chain, forward_kinematics(chain, qa), ests(qa, oo), qa, qb,
                          uu, ff, kp);
  };

  const auto ev = eval(q, q1, u, f, o);
  CHECK(rel_err(ev.dq_t, num_jac([&](const Eigen::VectorXd& x) {
          return eval(x, q1, u, f, o).r;
        }, q)) < 1e-5);
  CHECK(rel_err(ev.dq_t1, num_jac([&](const Eigen::VectorXd& x) {
          return eval(q, x, u, f, o).r;
        }, q1)) < 1e-7);
  CHECK(rel_err(ev.du_t, num_jac([&](const Eigen::VectorXd& x) {
          return eval(q, q1, x, f, o).r;
        }, u)) < 1e-7);
  CHECK(rel_err(ev.do_t, num_jac_pose([&](const Pose& oo) {
          return eval(q, q1, u, f, oo).r;
        }, o)) < 1e-5);
  for (int i = 0; i < 2; ++i) {
    CHECK(rel_err(ev.df[i], num_jac([&](const Eigen::VectorXd& x) {
            auto ff = f;
            ff[i] = x;
            return eval(q, q1, u, ff, o).r;
          }, Eigen::VectorXd(f[i]))) < 1e-7);
  }
}

TEST_CASE("wrench balance: resting support and least-squares grasps") {
  const ObjectModel free_model;
  const double m = 0.1;

  SUBCASE("resting support through the CoM is exact equilibrium") {
    EnvArm arm;
    arm.c = Vector3d(0, 0, -0.02);  // support point under the CoM
    const Pose o = Pose::Identity();
    const auto ev = wrench_balance({}, 0, {}, {}, Vector3d(0, 0, 0.98), &arm, m,
                                   Vector3d::Zero(), o, o, free_model);
    CHECK(ev.r.norm() < 1e-15);
  }

  SUBCASE("zero mass, zero forces: all residuals vanish") {
    const Pose o = Pose::Identity();
    const auto ev = wrench_balance({}, 0, {}, {}, Vector3d::Zero(), nullptr, 0.0,
                                   Vector3d::Zero(), o, o, free_model);
    CHECK(ev.r.norm() == 0.0);
  }

  SUBCASE("environment force without an arm is rejected") {
    const Pose o = Pose::Identity();
    CHECK_THROWS_AS(wrench_balance({}, 0, {}, {}, Vector3d(0, 0, 1), nullptr, m,
                                   Vector3d::Zero(), o, o, free_model),
                    std::invalid_argument);
  }

  SUBCASE("least-squares forces on cube grasps satisfy the balance") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-0.015, 0.015);
    for (int nf : {2, 3}) {
      for (int it = 0; it < 15; ++it) {
        // synthetic contact estimates: points on cube faces. Two fingers
        // cannot torque about the line joining their contacts, so the
        // 2-contact grasp is antipodal (the line passes through the CoM and
        // gravity's wrench stays in range of the map).
        std::vector<ContactEstimate> est(nf);
        std::vector<int> off(nf, 0);
        for (int i = 0; i < nf; ++i) {
          est[i].c = Vector3d(u(rng), u(rng), u(rng));
          est[i].c[i % 3] = (i % 2 ? -0.02 : 0.02);
          if (nf == 2 && i == 1) est[i].c = -est[0].c;
          est[i].Jc = Eigen::Matrix3Xd::Zero(3, 1);
          est[i].dc_dq = Eigen::Matrix3Xd::Zero(3, 1);
        }
        const Pose o = Pose::Identity();
        // linear map from stacked forces to the 6-dim wrench residual
        Eigen::MatrixXd M(6, 3 * nf);
        for (int i = 0; i < nf; ++i) {
          M.block(0, 3 * i, 3, 3) = Matrix3d::Identity();
          M.block(3, 3 * i, 3, 3) = -skew(est[i].c - o.p);  // f x r = -[r]x f
        }
        Eigen::VectorXd b(6);
        b << 0, 0, -m * 9.8, 0, 0, 0;
        const Eigen::VectorXd F =
            M.completeOrthogonalDecomposition().solve(-b);
        std::vector<Vector3d> f(nf);
        for (int i = 0; i < nf; ++i) f[i] = F.segment<3>(3 * i);
        const auto ev = wrench_balance(est, nf, off, f, Vector3d::Zero(), nullptr, m,
                                       Vector3d::Zero(), o, o, free_model);
        CHECK(ev.r.norm() < 1e-9);
        double fz = 0;
        for (const auto& fi : f) fz += fi.z();
        CHECK(fz == doctest::Approx(9.8 * m).epsilon(1e-9));
      }
    }
  }

  SUBCASE("finger relabeling leaves the residual unchanged") {
    std::mt19937_64 rng(59);
    std::vector<ContactEstimate> est(3);
    std::vector<Vector3d> f(3);
    std::vector<int> off = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      est[i].c = rand_vec(rng, 0.02);
      est[i].Jc = Eigen::Matrix3Xd::Zero(3, 1);
      est[i].dc_dq = Eigen::Matrix3Xd::Zero(3, 1);
      f[i] = rand_vec(rng, 0.8);
    }
    const Pose o = rand_pose(rng, 0.05);
    const auto a = wrench_balance(est, 3, off, f, Vector3d::Zero(), nullptr, 0.1,
                                  Vector3d(0.001, 0.002, -0.001), o, o, ObjectModel{});
    std::swap(est[0], est[2]);
    std::swap(f[0], f[2]);
    const auto b = wrench_balance(est, 3, off, f, Vector3d::Zero(), nullptr, 0.1,
                                  Vector3d(0.001, 0.002, -0.001), o, o, ObjectModel{});
    CHECK((a.r - b.r).norm() < 1e-15);
  }
}

TEST_CASE("revolute wrench balance keeps only axis torque about the anchor") {
  ObjectModel valve;
  valve.type = JointType::Revolute;
  valve.axis = Vector3d::UnitZ();
  valve.anchor = Vector3d(0.02, -0.01, 0.15);

  std::mt19937_64 rng(61);
  std::vector<ContactEstimate> est(2);
  std::vector<Vector3d> f(2);
  // equal and opposite pinch through the axis: no net axis torque
  est[0].c = valve.anchor + Vector3d(0.08, 0, 0);
  est[1].c = valve.anchor + Vector3d(0.08, 0, 0.004);
  est[0].Jc = est[1].Jc = Eigen::Matrix3Xd::Zero(3, 1);
  est[0].dc_dq = est[1].dc_dq = Eigen::Matrix3Xd::Zero(3, 1);
  f[0] = Vector3d(0, 0.7, 0.2);
  f[1] = Vector3d(0, -0.7, 0.3);
  const Pose o = Pose::Identity();
  const auto ev = wrench_balance(est, 2, {0, 0}, f, Vector3d::Zero(), nullptr, 0.2,
                                 Vector3d::Zero(), o, o, valve);
  REQUIRE(ev.r.size() == 1);
  // torques of the pinch pair cancel about the axis; gravity is axis-parallel
  CHECK(std::abs(ev.r[0]) < 1e-12);

  // unbalanced tangential push shows up as exactly its lever-arm moment
  f[1].setZero();
  const auto ev2 = wrench_balance(est, 2, {0, 0}, f, Vector3d::Zero(), nullptr, 0.2,
                                  Vector3d::Zero(), o, o, valve);
  CHECK(ev2.r[0] == doctest::Approx(0.08 * 0.7).epsilon(1e-12));
}

TEST_CASE("wrench balance Jacobians match finite differences") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(67);
  const int nq = chain.nq();
  const SdfScene scene = box_scene(Vector3d(0.05, 0.04, 0.06));
  SdfScene env = plane_scene();

  const Eigen::VectorXd q = rand_config(chain, rng);
  const std::vector<Vector3d> f = {rand_vec(rng, 0.5), rand_vec(rng, 0.5)};
  const Vector3d fe = rand_vec(rng, 0.5);
  Pose o = rand_pose(rng, 0.06);
  o.p.z() += 0.12;
  Pose o1 = rand_pose(rng, 0.06);
  const std::vector<int> off = {0, 2};
  const double m = 0.15;
  const Vector3d cb(0.004, -0.002, 0.007);

  std::vector<Vector3d> obj_pts;
  for (int j = 0; j < 6; ++j) obj_pts.push_back(rand_vec(rng, 0.02));

  ObjectModel models[3];
  models[1].type = JointType::Revolute;
  models[1].axis = Vector3d(0.3, -0.2, 1).normalized();
  models[1].anchor = Vector3d(0.03, 0.01, 0.1);
  models[2].type = JointType::Spherical;
  models[2].anchor = Vector3d(-0.02, 0.03, 0.08);
  models[2].body_point = Vector3d(0.01, 0.005, -0.02);

  for (const ObjectModel& model : models) {
    auto eval = [&](const Eigen::VectorXd& qq, const std::vector<Vector3d>& ff,
                    const Vector3d& ffe, const Pose& oo, const Pose& oo1) {
      const auto fkq = forward_kinematics(chain, qq);
      std::vector<ContactEstimate> e;
      e.push_back(contact_estimate(fkq[0], 2,
                                   cluster_finger(1, Vector3d(0.11, 0, 0), 5, 71),
                                   scene, oo, 400.0, EstimateLevel::Gradients));
      e.push_back(contact_estimate(fkq[1], 3,
                                   cluster_finger(2, Vector3d(0.14, 0, 0), 5, 73),
                                   scene, oo, 400.0, EstimateLevel::Gradients));
      const auto envc = env_contact_estimate(obj_pts, oo, env, 400.0,
                                             EstimateLevel::Gradients);
      EnvArm arm;
      arm.c = envc.c;
      arm.dc_dx = envc.dc_dx;
      arm.dc_dw = envc.dc_dw;
      return wrench_balance(e, nq, off, ff, ffe, &arm, m, cb, oo, oo1, model);
    };

    const auto ev = eval(q, f, fe, o, o1);
    CHECK(rel_err(ev.dq_t, num_jac([&](const Eigen::VectorXd& x) {
            return eval(x, f, fe, o, o1).r;
          }, q)) < 1e-5);
    CHECK(rel_err(ev.do_t, num_jac_pose([&](const Pose& oo) {
            return eval(q, f, fe, oo, o1).r;
          }, o)) < 1e-5);
    CHECK(rel_err(ev.do_t1, num_jac_pose([&](const Pose& oo) {
            return eval(q, f, fe, o, oo).r;
          }, o1)) < 1e-5);
    CHECK(rel_err(ev.dfe, num_jac([&](const Eigen::VectorXd& x) {
            return eval(q, f, Vector3d(x), o, o1).r;
          }, Eigen::VectorXd(fe))) < 1e-7);
    for (int i = 0; i < 2; ++i)
      CHECK(rel_err(ev.df[i], num_jac([&](const Eigen::VectorXd& x) {
              auto ff = f;
              ff[i] = Vector3d(x);
              return eval(q, ff, fe, o, o1).r;
            }, Eigen::VectorXd(f[i]))) < 1e-7);
  }
}

TEST_CASE("friction pyramid agrees with the membership oracle") {
  std::mt19937_64 rng(79);
  const double mu = 0.95;
  int feasible_seen = 0;
  for (int it = 0; it < 20000; ++it) {
    const Vector3d n = rand_vec(rng, 1.0).normalized();
    const Vector3d f = rand_vec(rng, 1.0);
    const auto ev = friction_cone(f, n, mu, 0, 1);
    REQUIRE(ev.r.size() == 5);
    CHECK_FALSE(ev.equality);
    const bool feasible = (ev.r.array() <= 1e-12).all();

    const auto T = tangent_basis_2d(n);
    const double fn = n.dot(f);
    const bool oracle = std::abs(T.row(0).dot(f)) <= mu * fn + 1e-12 &&
                        std::abs(T.row(1).dot(f)) <= mu * fn + 1e-12 && fn >= -1e-12;
    CHECK(feasible == oracle);
    if (feasible) {
      ++feasible_seen;
      const Vector3d ft = f - fn * n;
      CHECK(ft.norm() <= std::sqrt(2.0) * mu * fn + 1e-9);
    }
  }
  CHECK(feasible_seen > 500);  // the sweep actually exercises both outcomes

  // boundary cases
  const Vector3d n = Vector3d::UnitZ();
  const auto T = tangent_basis_2d(n);
  const Vector3d t1 = T.row(0).transpose();
  const auto pure = friction_cone(2.0 * n, n, mu, 0, 1);
  CHECK((pure.r.head<4>().array() == -mu * 2.0).all());
  const auto edge = friction_cone(mu * 1.5 * t1 + 1.5 * n, n, mu, 0, 1);
  CHECK(std::abs(edge.r[0]) < 1e-12);
  CHECK((edge.r.tail<4>().array() < 1e-12).all());
}

TEST_CASE("min force activates at the magnitude floor") {
  const auto always_ok = min_force(Vector3d(0.3, 0, 0), 0.0, 0, 2);
  CHECK(always_ok.r[0] < 0);
  CHECK_FALSE(always_ok.equality);
  const auto at_floor = min_force(Vector3d(0, 1.0, 0), 1.0, 0, 2);
  CHECK(std::abs(at_floor.r[0]) < 1e-9);
  const auto violated = min_force(Vector3d::Zero(), 1.0, 1, 2);
  CHECK(violated.r[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(violated.df[0].size() == 0);
  CHECK(violated.df[1].size() > 0);

  // gradient
  std::mt19937_64 rng(83);
  const Vector3d f = rand_vec(rng, 0.7);
  const auto ev = min_force(f, 0.5, 0, 1);
  const auto J = num_jac([&](const Eigen::VectorXd& x) {
    return min_force(Vector3d(x), 0.5, 0, 1).r;
  }, Eigen::VectorXd(f));
  CHECK(rel_err(ev.df[0], J) < 1e-9);
}

TEST_CASE("environment contact constraint reads the estimate") {
  SdfScene env = plane_scene();
  std::vector<Vector3d> pts;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      pts.push_back(Vector3d(0.004 * i, 0.004 * j, -0.01));  // bottom face of a peg

  Pose o;
  o.p = Vector3d(0, 0, 0.01);  // flush on the plane
  auto flush = env_contact_constraint(
      env_contact_estimate(pts, o, env, 1000.0, EstimateLevel::Gradients));
  CHECK(flush.r[0] >= 0.0);
  CHECK(flush.r[0] <= std::log(25.0) / 1000.0 + 1e-12);

  o.p.z() = 0.04;  // 3 cm up
  auto lifted = env_contact_constraint(
      env_contact_estimate(pts, o, env, 1000.0, EstimateLevel::Gradients));
  CHECK(lifted.r[0] == doctest::Approx(0.03).epsilon(1e-2));

  CHECK(rel_err(lifted.do_t, num_jac_pose([&](const Pose& oo) {
          return env_contact_constraint(
                     env_contact_estimate(pts, oo, env, 1000.0, EstimateLevel::Values))
              .r;
        }, o)) < 1e-5);
}

TEST_CASE("region constraint measures smoothed distance to the moving anchor") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(89);
  const Eigen::VectorXd q = rand_config(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const SdfScene scene = box_scene(Vector3d(0.05, 0.05, 0.05));
  const double h = 0.02;

  SampledFinger one;
  one.link = 1;
  one.points.push_back(Vector3d(0.11, 0, 0));
  const Pose o = rand_pose(rng, 0.05);
  const auto est = contact_estimate(fk[0], 2, one, scene, o, 400.0,
                                    EstimateLevel::Gradients);

  // anchor placed exactly at / 2 cm / 5 cm from the contact point
  const Vector3d at = o.act_inv(est.c);
  CHECK(region_constraint(est, chain.nq(), 0, o, at, h).r[0] ==
        doctest::Approx(-0.02).epsilon(1e-4));
  const Vector3d two_cm = o.act_inv(est.c + Vector3d(0, 0.02, 0));
  CHECK(std::abs(region_constraint(est, chain.nq(), 0, o, two_cm, h).r[0]) < 1e-6);
  const Vector3d five_cm = o.act_inv(est.c + Vector3d(0.05, 0, 0));
  CHECK(region_constraint(est, chain.nq(), 0, o, five_cm, h).r[0] ==
        doctest::Approx(0.03).epsilon(1e-6));

  const Vector3d anchor = o.act_inv(est.c + Vector3d(0.01, -0.02, 0.015));
  const auto ev = region_constraint(est, chain.nq(), 0, o, anchor, h);
  CHECK_FALSE(ev.equality);
  CHECK(rel_err(ev.dq_t, num_jac([&](const Eigen::VectorXd& x) {
          const auto e = contact_estimate(forward_kinematics(chain, x)[0], 2, one,
                                          scene, o, 400.0, EstimateLevel::Gradients);
          return region_constraint(e, chain.nq(), 0, o, anchor, h).r;
        }, q)) < 1e-5);
  CHECK(rel_err(ev.do_t, num_jac_pose([&](const Pose& oo) {
          const auto e = contact_estimate(fk[0], 2, one, scene, oo, 400.0,
                                          EstimateLevel::Gradients);
          return region_constraint(e, chain.nq(), 0, oo, anchor, h).r;
        }, o)) < 1e-5);
}

TEST_CASE("tracking constraint pins the fingertip in the object frame") {
  KinematicChain chain = two_finger_chain();
  std::mt19937_64 rng(97);
  const Eigen::VectorXd q = rand_config(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const Pose o0 = rand_pose(rng, 0.08);
  const int fi = 1, off = chain.finger_offset(1);
  const Finger& fg = chain.fingers[fi];
  const Vector3d tip =
      fk[fi].link_pose[fg.joints.size() - 1].act(fg.tip_offset.p);
  const Vector3d p_hat = o0.act_inv(tip);

  // recorded at this very state: zero residual
  const auto ev0 = tracking_constraint(fk[fi], fg, chain.nq(), off, o0, p_hat);
  CHECK(ev0.r.norm() < 1e-14);

  // translate the object, keep the robot: residual is exactly the offset
  Pose moved = o0;
  moved.p += Vector3d(0.01, -0.02, 0.005);
  const auto ev1 = tracking_constraint(fk[fi], fg, chain.nq(), off, moved, p_hat);
  CHECK(ev1.r.norm() == doctest::Approx(Vector3d(0.01, -0.02, 0.005).norm()).epsilon(1e-12));

  const auto ev = tracking_constraint(fk[fi], fg, chain.nq(), off, moved, p_hat);
  CHECK(rel_err(ev.dq_t, num_jac([&](const Eigen::VectorXd& x) {
          return tracking_constraint(forward_kinematics(chain, x)[fi], fg, chain.nq(),
                                     off, moved, p_hat)
              .r;
        }, q)) < 1e-6);
  CHECK(rel_err(ev.do_t, num_jac_pose([&](const Pose& oo) {
          return tracking_constraint(fk[fi], fg, chain.nq(), off, oo, p_hat).r;
        }, moved)) < 1e-6);
}
