#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "rollopt/errors.hpp"
#include "rollopt/kinematics.hpp"
#include "support/finite_diff.hpp"
#include "support/fixtures.hpp"

using namespace rollopt;
using namespace rollopt::testing;

namespace {
std::mt19937_64 rng(23);
}

TEST_CASE("planar two-link position matches the textbook formula") {
  KinematicChain c;
  c.fingers.push_back(planar_finger(Vector3d::Zero(), 0.06, 0.05));
  Eigen::VectorXd q(2);
  q << 0.3, -0.7;
  const auto fk = forward_kinematics(c, q);
  const Vector3d tip = fk[0].link_pose[1].act(c.fingers[0].tip_offset.p);
  const double x = 0.06 * std::cos(0.3) + 0.05 * std::cos(0.3 - 0.7);
  const double y = 0.06 * std::sin(0.3) + 0.05 * std::sin(0.3 - 0.7);
  CHECK(tip.x() == doctest::Approx(x));
  CHECK(tip.y() == doctest::Approx(y));
  CHECK(tip.z() == doctest::Approx(0.0));
}

TEST_CASE("point jacobian matches finite differences; off-path columns vanish") {
  const KinematicChain c = two_finger_chain();
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd q = rand_config(c, rng);
    const auto fk = forward_kinematics(c, q);
    for (size_t fi = 0; fi < c.fingers.size(); ++fi) {
      const int off = c.finger_offset(static_cast<int>(fi));
      const int nf = static_cast<int>(c.fingers[fi].joints.size());
      for (int link = 0; link < nf; ++link) {
        const Vector3d p_local(0.02, 0.01, -0.015);
        const Vector3d p = fk[fi].link_pose[link].act(p_local);
        const Eigen::Matrix3Xd J = point_jacobian(fk[fi], link, p);
        auto f = [&](const Eigen::VectorXd& qq) -> Eigen::VectorXd {
          const auto ffk = forward_kinematics(c, qq);
          return ffk[fi].link_pose[link].act(p_local);
        };
        const Eigen::MatrixXd Jnum = num_jac(f, q);
        CHECK(rel_err(J, Jnum.middleCols(off, nf)) < 1e-7);
        // joints of the other finger contribute nothing
        for (int col = 0; col < Jnum.cols(); ++col)
          if (col < off || col >= off + nf) CHECK(Jnum.col(col).norm() < 1e-7);
        // columns beyond the owning link vanish
        for (int col = link + 1; col < nf; ++col) CHECK(J.col(col).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("jacobian derivative terms match finite differences") {
  const KinematicChain c = two_finger_chain();
  std::normal_distribution<double> n01(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd q = rand_config(c, rng);
    const auto fk = forward_kinematics(c, q);
    for (size_t fi = 0; fi < c.fingers.size(); ++fi) {
      const int off = c.finger_offset(static_cast<int>(fi));
      const int nf = static_cast<int>(c.fingers[fi].joints.size());
      const int link = nf - 1;
      const Vector3d p_local(0.03, 0.005, 0.01);
      const Vector3d p = fk[fi].link_pose[link].act(p_local);
      Eigen::VectorXd v(nf);
      Vector3d f3(n01(rng), n01(rng), n01(rng));
      for (int i = 0; i < nf; ++i) v[i] = n01(rng);

      const Eigen::Matrix3Xd djv = point_jacobian_dot_v(fk[fi], link, p, v);
      auto jv = [&](const Eigen::VectorXd& qf) -> Eigen::VectorXd {
        Eigen::VectorXd qq = q;
        qq.segment(off, nf) = qf;
        const auto ffk = forward_kinematics(c, qq);
        const Vector3d pw = ffk[fi].link_pose[link].act(p_local);
        return point_jacobian(ffk[fi], link, pw) * v;
      };
      CHECK(rel_err(djv, num_jac(jv, q.segment(off, nf))) < 1e-6);

      const Eigen::MatrixXd djtf = point_jacobian_T_f_dq(fk[fi], link, p, f3);
      auto jtf = [&](const Eigen::VectorXd& qf) -> Eigen::VectorXd {
        Eigen::VectorXd qq = q;
        qq.segment(off, nf) = qf;
        const auto ffk = forward_kinematics(c, qq);
        const Vector3d pw = ffk[fi].link_pose[link].act(p_local);
        return point_jacobian(ffk[fi], link, pw).transpose() * f3;
      };
      CHECK(rel_err(djtf, num_jac(jtf, q.segment(off, nf))) < 1e-6);
    }
  }
}

TEST_CASE("gravity torque: single horizontal link and energy oracle") {
  // one link, mass m, com at distance L, joint about y at origin:
  // at q=0 the link is horizontal along x -> |tau| = m g L
  KinematicChain c;
  Finger f;
  Joint j;
  j.axis = Vector3d::UnitY();
  f.joints = {j};
  f.links = {{0.2, Vector3d(0.15, 0, 0)}};
  f.tip_offset = Pose{Vector3d(0.3, 0, 0), Quaterniond::Identity()};
  c.fingers = {f};
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(1);
  auto fk = forward_kinematics(c, q0);
  const Eigen::VectorXd tau = gravity_torque(c, q0, fk);
  CHECK(std::abs(tau[0]) == doctest::Approx(0.2 * 9.8 * 0.15));

  // zero-mass chain
  KinematicChain z = two_finger_chain();
  for (auto& fg : z.fingers)
    for (auto& l : fg.links) l.mass = 0;
  const Eigen::VectorXd q = rand_config(z, rng);
  CHECK(gravity_torque(z, q, forward_kinematics(z, q)).norm() == 0.0);

  // potential-energy finite differences, U = sum m g z_com
  const KinematicChain c2 = two_finger_chain();
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd qq = rand_config(c2, rng);
    auto U = [&](const Eigen::VectorXd& qv) {
      const auto ffk = forward_kinematics(c2, qv);
      double u = 0;
      for (size_t fi = 0; fi < c2.fingers.size(); ++fi)
        for (size_t li = 0; li < c2.fingers[fi].joints.size(); ++li) {
          const auto& link = c2.fingers[fi].links[li];
          u += link.mass * 9.8 * ffk[fi].link_pose[li].act(link.com).z();
        }
      return u;
    };
    const auto ffk = forward_kinematics(c2, qq);
    CHECK(rel_err(gravity_torque(c2, qq, ffk).transpose(),
                  num_grad([&](const Eigen::VectorXd& x) { return U(x); }, qq).transpose()) < 1e-6);
    CHECK(rel_err(gravity_torque_dq(c2, qq, ffk),
                  num_jac([&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                    return gravity_torque(c2, x, forward_kinematics(c2, x));
                  }, qq)) < 1e-6);
  }
}

TEST_CASE("chain file loading validates fields") {
  const char* good = R"({
    "base": {"p": [0, 0, 0]},
    "fingers": [{
      "name": "f0",
      "origin": {"p": [0.1, 0, 0.02]},
      "joints": [
        {"name": "j0", "axis": [0, 0, 1], "limits": [-2.5, 2.5], "action_limit": 0.25},
        {"name": "j1", "origin": {"p": [0.05, 0, 0]}, "axis": [0, 0, 1]}
      ],
      "links": [{"mass": 0.03, "com": [0.025, 0, 0]}, {"mass": 0.02, "com": [0.02, 0, 0]}],
      "tip_mesh": "tip.obj",
      "tip_offset": {"p": [0.04, 0, 0]}
    }]
  })";
  std::ofstream("chain_tmp.json") << good;
  const KinematicChain c = load_chain_file("chain_tmp.json");
  CHECK(c.nq() == 2);
  CHECK(c.fingers[0].joints[0].action_limit == 0.25);
  CHECK(c.fingers[0].joints[1].action_limit == 0.3);  // default
  CHECK(c.fingers[0].tip_mesh.find("tip.obj") != std::string::npos);

  std::ofstream("chain_bad.json") << R"({"fingers": [{"joints": [{"axis": [0, 0, 0]}], "tip_mesh": "t.obj"}]})";
  try {
    load_chain_file("chain_bad.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path == "fingers[0].joints[0].axis");
  }
  std::remove("chain_tmp.json");
  std::remove("chain_bad.json");
}
