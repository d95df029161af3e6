#pragma once

// Rigid poses and analytic signed distance fields.
//
// An object is a union of primitives, each with a fixed transform in the
// object body frame; composition is a hard min with argmin bookkeeping.
// All SDF queries return derivatives w.r.t. the world query point and the
// object pose (translation + body-frame orientation tangent), plus the
// spatial Hessian terms needed to differentiate contact normals.

#include <string>
#include <vector>

#include "rollopt/so3.hpp"

namespace rollopt {

struct Pose {
  Vector3d p{Vector3d::Zero()};
  Quaterniond q{Quaterniond::Identity()};

  static Pose Identity() { return Pose{}; }

  Vector3d act(const Vector3d& v) const { return p + q * v; }
  Vector3d act_inv(const Vector3d& v) const { return q.conjugate() * (v - p); }
  Pose compose(const Pose& other) const { return {p + q * other.p, (q * other.q).normalized()}; }
  Pose inverse() const {
    const Quaterniond qi = q.conjugate();
    return {qi * (-p), qi};
  }
};

enum class PrimitiveKind { Sphere, Box, Cylinder };

// size semantics: Sphere (radius, -, -); Box half-extents (hx, hy, hz);
// Cylinder (radius, half_length, -) with axis z in the primitive frame.
struct Primitive {
  PrimitiveKind kind{PrimitiveKind::Sphere};
  Vector3d size{Vector3d::Ones()};
  Pose local{};
};

struct SdfScene {
  std::vector<Primitive> prims;
};

struct SdfResult {
  double phi{0};
  int prim{-1};
  // approximate distance (in query-point space) to the nearest derivative
  // discontinuity: case boundaries, axis/center singularities, min ties.
  double smooth_margin{1e30};
  bool nonsmooth{false};  // margin below 1e-9; derivatives are a subgradient

  Vector3d dphi_dp{Vector3d::Zero()};   // w.r.t. world query point
  Vector3d dphi_dx{Vector3d::Zero()};   // w.r.t. object position (= -dphi_dp)
  Vector3d dphi_dw{Vector3d::Zero()};   // w.r.t. body-frame orientation tangent
  Matrix3d d2phi_dp2{Matrix3d::Zero()}; // spatial Hessian, world frame
  Matrix3d dgrad_dw{Matrix3d::Zero()};  // d(dphi_dp)/d(orientation tangent)
};

// Distance from world point to the scene posed at `o`. `with_derivs=false`
// fills only phi / prim / margin.
SdfResult scene_sdf(const SdfScene& scene, const Pose& o, const Vector3d& p_world,
                    bool with_derivs = true);

// Axis-aligned bound on the scene extent in the body frame (for sampling
// and plant heuristics): max |vertex| over primitive supports.
double scene_bounding_radius(const SdfScene& scene);

}  // namespace rollopt
