#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rollopt/geometry.hpp"
#include "support/finite_diff.hpp"

using namespace rollopt;
using namespace rollopt::testing;

namespace {

std::mt19937_64 rng(11);
double urand(double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}
Vector3d rand_vec(double s = 1.0) {
  std::normal_distribution<double> n(0, s);
  return Vector3d(n(rng), n(rng), n(rng));
}
Quaterniond rand_quat() {
  std::normal_distribution<double> n(0, 1);
  Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

SdfScene one(Primitive p) { return SdfScene{{p}}; }

SdfScene composite() {
  // valve-like cross plus a sphere hub
  SdfScene s;
  s.prims.push_back({PrimitiveKind::Box, Vector3d(0.10, 0.01, 0.01), Pose{}});
  s.prims.push_back({PrimitiveKind::Box, Vector3d(0.01, 0.10, 0.01), Pose{}});
  s.prims.push_back({PrimitiveKind::Sphere, Vector3d(0.025, 0, 0),
                     Pose{Vector3d(0, 0, 0.02), Quaterniond::Identity()}});
  return s;
}

}  // namespace

TEST_CASE("primitive distances match closed forms") {
  const Pose id = Pose::Identity();

  SUBCASE("sphere") {
    auto s = one({PrimitiveKind::Sphere, Vector3d(0.5, 0, 0), Pose{}});
    CHECK(scene_sdf(s, id, Vector3d(2, 0, 0)).phi == doctest::Approx(1.5));
    CHECK(scene_sdf(s, id, Vector3d(0.1, 0, 0)).phi == doctest::Approx(-0.4));
  }
  SUBCASE("box") {
    auto s = one({PrimitiveKind::Box, Vector3d(1, 2, 3), Pose{}});
    CHECK(scene_sdf(s, id, Vector3d(3, 0, 0)).phi == doctest::Approx(2.0));
    CHECK(scene_sdf(s, id, Vector3d(2, 3, 0)).phi == doctest::Approx(std::sqrt(2.0)));
    CHECK(scene_sdf(s, id, Vector3d(0, 0, 0)).phi == doctest::Approx(-1.0));
    CHECK(scene_sdf(s, id, Vector3d(0.9, 0, 0)).phi == doctest::Approx(-0.1));
  }
  SUBCASE("cylinder") {
    auto s = one({PrimitiveKind::Cylinder, Vector3d(1, 2, 0), Pose{}});
    CHECK(scene_sdf(s, id, Vector3d(3, 0, 0)).phi == doctest::Approx(2.0));
    CHECK(scene_sdf(s, id, Vector3d(0, 0, 5)).phi == doctest::Approx(3.0));
    CHECK(scene_sdf(s, id, Vector3d(2, 0, 3)).phi == doctest::Approx(std::sqrt(2.0)));
    CHECK(scene_sdf(s, id, Vector3d(0, 0, 0)).phi == doctest::Approx(-1.0));
  }
  SUBCASE("posed primitive") {
    Primitive p{PrimitiveKind::Sphere, Vector3d(0.5, 0, 0),
                Pose{Vector3d(1, 0, 0), Quaterniond::Identity()}};
    Pose o{Vector3d(0, 1, 0), quat_exp(Vector3d(0, 0, M_PI / 2))};
    // body point (1,0,0) maps to world (0,1,0)+Rz(90)*(1,0,0) = (0,2,0)
    CHECK(scene_sdf(one(p), o, Vector3d(0, 4, 0)).phi == doctest::Approx(1.5));
  }
}

TEST_CASE("hard-min composition tracks the argmin primitive") {
  const auto s = composite();
  const Pose id = Pose::Identity();
  CHECK(scene_sdf(s, id, Vector3d(0.2, 0, 0)).prim == 0);
  CHECK(scene_sdf(s, id, Vector3d(0, 0.2, 0)).prim == 1);
  CHECK(scene_sdf(s, id, Vector3d(0, 0, 0.1)).prim == 2);
  // near-tie between the two arms has small margin
  const auto tie = scene_sdf(s, id, Vector3d(0.05, 0.05, 0.0));
  CHECK(tie.smooth_margin < 1e-6);
}

TEST_CASE("gradients, pose derivatives, and Hessians match finite differences") {
  std::vector<SdfScene> scenes;
  scenes.push_back(one({PrimitiveKind::Sphere, Vector3d(0.04, 0, 0), Pose{}}));
  scenes.push_back(one({PrimitiveKind::Box, Vector3d(0.02, 0.03, 0.05), Pose{}}));
  scenes.push_back(one({PrimitiveKind::Cylinder, Vector3d(0.02, 0.05, 0), Pose{}}));
  scenes.push_back(composite());
  // posed primitives inside the scene
  scenes.push_back(one({PrimitiveKind::Cylinder, Vector3d(0.02, 0.05, 0),
                        Pose{Vector3d(0.01, -0.02, 0.03), rand_quat()}}));

  int tested = 0;
  for (const auto& scene : scenes) {
    for (int i = 0; i < 400; ++i) {
      const Pose o{rand_vec(0.05), rand_quat()};
      const Vector3d p = o.act(rand_vec(0.08));
      const SdfResult r = scene_sdf(scene, o, p);
      if (r.smooth_margin < 2e-4) continue;  // skip near kinks; FD is invalid there
      ++tested;

      auto f_p = [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, scene_sdf(scene, o, Vector3d(x), false).phi);
      };
      CHECK(rel_err(r.dphi_dp.transpose(), num_jac(f_p, p)) < 1e-6);

      auto f_x = [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(
            1, scene_sdf(scene, Pose{Vector3d(x), o.q}, p, false).phi);
      };
      CHECK(rel_err(r.dphi_dx.transpose(), num_jac(f_x, o.p)) < 1e-6);

      auto f_w = [&](const Quaterniond& q) {
        return Eigen::VectorXd::Constant(1, scene_sdf(scene, Pose{o.p, q}, p, false).phi);
      };
      CHECK(rel_err(r.dphi_dw.transpose(), num_jac_quat(f_w, o.q)) < 1e-6);

      auto g_p = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return scene_sdf(scene, o, Vector3d(x)).dphi_dp;
      };
      CHECK(rel_err(r.d2phi_dp2, num_jac(g_p, p)) < 1e-5);

      auto g_w = [&](const Quaterniond& q) -> Eigen::VectorXd {
        return scene_sdf(scene, Pose{o.p, q}, p).dphi_dp;
      };
      CHECK(rel_err(r.dgrad_dw, num_jac_quat(g_w, o.q)) < 1e-5);
    }
  }
  CHECK(tested > 500);  // the rejection filter must not hollow out the sweep
}

TEST_CASE("exact nonsmooth loci are flagged") {
  auto s = one({PrimitiveKind::Sphere, Vector3d(0.5, 0, 0), Pose{}});
  CHECK(scene_sdf(s, Pose::Identity(), Vector3d::Zero()).nonsmooth);
  auto b = one({PrimitiveKind::Box, Vector3d(1, 1, 1), Pose{}});
  // exact diagonal inside: tie between faces
  CHECK(scene_sdf(b, Pose::Identity(), Vector3d(0.5, 0.5, 0.5)).nonsmooth);
}

TEST_CASE("bounding radius covers support points") {
  const auto s = composite();
  const double r = scene_bounding_radius(s);
  for (int i = 0; i < 500; ++i) {
    const Vector3d d = rand_vec().normalized() * r;
    CHECK(scene_sdf(s, Pose::Identity(), d, false).phi >= -1e-12);
  }
}
