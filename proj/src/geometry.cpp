#include "rollopt/geometry.hpp"

#include <cmath>
#include <limits>

namespace rollopt {
namespace {

struct LocalSdf {
  double phi{0};
  double margin{1e30};
  Vector3d grad{Vector3d::Zero()};
  Matrix3d hess{Matrix3d::Zero()};
};

double sgn(double v) { return v < 0 ? -1.0 : 1.0; }

LocalSdf sphere_sdf(const Vector3d& u, double r) {
  LocalSdf out;
  const double n = u.norm();
  out.phi = n - r;
  out.margin = n;  // gradient kink at the center only
  if (n > 1e-12) {
    const Vector3d un = u / n;
    out.grad = un;
    out.hess = (Matrix3d::Identity() - un * un.transpose()) / n;
  } else {
    out.grad = Vector3d::UnitZ();  // subgradient
  }
  return out;
}

LocalSdf box_sdf(const Vector3d& u, const Vector3d& h) {
  LocalSdf out;
  Vector3d q, s;
  for (int i = 0; i < 3; ++i) {
    q[i] = std::abs(u[i]) - h[i];
    s[i] = sgn(u[i]);
  }
  // margin to any activation boundary |u_i| = h_i
  out.margin = std::min({std::abs(q[0]), std::abs(q[1]), std::abs(q[2])});

  const double qmax = q.maxCoeff();
  if (qmax > 0) {
    Vector3d w = q.cwiseMax(0.0);
    const double n = w.norm();
    out.phi = n;
    int active = 0;
    for (int i = 0; i < 3; ++i) active += q[i] > 0 ? 1 : 0;
    if (active >= 2) out.margin = std::min(out.margin, n);  // edge/corner meets surface
    const Vector3d wn = w / n;
    for (int i = 0; i < 3; ++i) {
      if (q[i] <= 0) continue;
      out.grad[i] = s[i] * wn[i];
      for (int j = 0; j < 3; ++j) {
        if (q[j] <= 0) continue;
        out.hess(i, j) = s[i] * s[j] * ((i == j ? 1.0 : 0.0) - wn[i] * wn[j]) / n;
      }
    }
  } else {
    int a = 0;
    double second = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < 3; ++i)
      if (q[i] > q[a]) a = i;
    for (int i = 0; i < 3; ++i)
      if (i != a) second = std::max(second, q[i]);
    out.phi = q[a];
    out.grad = Vector3d::Zero();
    out.grad[a] = s[a];
    out.margin = std::min({out.margin, q[a] - second, std::abs(u[a])});
  }
  return out;
}

LocalSdf cylinder_sdf(const Vector3d& u, double r, double h) {
  LocalSdf out;
  const double rho = std::hypot(u.x(), u.y());
  const double d1 = rho - r;
  const double d2 = std::abs(u.z()) - h;
  const double sz = sgn(u.z());
  out.margin = std::min({std::abs(d1), std::abs(d2), rho});

  Eigen::Vector2d uxy_n = Eigen::Vector2d::Zero();
  Matrix3d hess_rho = Matrix3d::Zero();  // spatial Hessian of rho
  if (rho > 1e-12) {
    uxy_n = Eigen::Vector2d(u.x(), u.y()) / rho;
    Eigen::Matrix2d hxy = (Eigen::Matrix2d::Identity() - uxy_n * uxy_n.transpose()) / rho;
    hess_rho.topLeftCorner<2, 2>() = hxy;
  }
  const Vector3d grad_rho(uxy_n.x(), uxy_n.y(), 0.0);
  const Vector3d grad_az(0.0, 0.0, sz);

  if (d1 > 0 && d2 > 0) {
    const double n = std::hypot(d1, d2);
    out.phi = n;
    const double e1 = d1 / n, e2 = d2 / n;
    out.grad = e1 * grad_rho + e2 * grad_az;
    // 2D hessian of hypot in (rho, |z|) chained through (grad_rho, grad_az)
    Eigen::Matrix2d H2;
    H2 << 1 - e1 * e1, -e1 * e2, -e1 * e2, 1 - e2 * e2;
    H2 /= n;
    Eigen::Matrix<double, 2, 3> J;
    J.row(0) = grad_rho.transpose();
    J.row(1) = grad_az.transpose();
    out.hess = J.transpose() * H2 * J + e1 * hess_rho;
  } else if (d1 > 0) {
    out.phi = d1;
    out.grad = grad_rho;
    out.hess = hess_rho;
  } else if (d2 > 0) {
    out.phi = d2;
    out.grad = grad_az;
  } else {
    out.margin = std::min(out.margin, std::abs(d1 - d2));
    if (d1 > d2) {
      out.phi = d1;
      out.grad = grad_rho;
      out.hess = hess_rho;
    } else {
      out.phi = d2;
      out.grad = grad_az;
      out.margin = std::min(out.margin, std::abs(u.z()));
    }
  }
  return out;
}

LocalSdf primitive_local_sdf(const Primitive& prim, const Vector3d& u) {
  switch (prim.kind) {
    case PrimitiveKind::Sphere:
      return sphere_sdf(u, prim.size.x());
    case PrimitiveKind::Box:
      return box_sdf(u, prim.size);
    case PrimitiveKind::Cylinder:
      return cylinder_sdf(u, prim.size.x(), prim.size.y());
  }
  return {};
}

}  // namespace

SdfResult scene_sdf(const SdfScene& scene, const Pose& o, const Vector3d& p_world,
                    bool with_derivs) {
  SdfResult out;
  out.phi = std::numeric_limits<double>::infinity();
  const Vector3d p_body = o.act_inv(p_world);

  double second = std::numeric_limits<double>::infinity();
  LocalSdf best;
  for (int k = 0; k < static_cast<int>(scene.prims.size()); ++k) {
    const Primitive& prim = scene.prims[k];
    const Vector3d u = prim.local.act_inv(p_body);
    LocalSdf loc = primitive_local_sdf(prim, u);
    if (loc.phi < out.phi) {
      second = out.phi;
      out.phi = loc.phi;
      out.prim = k;
      best = loc;
    } else if (loc.phi < second) {
      second = loc.phi;
    }
  }
  if (out.prim < 0) return out;

  out.smooth_margin = best.margin;
  if (std::isfinite(second))
    out.smooth_margin = std::min(out.smooth_margin, 0.5 * (second - out.phi));
  out.nonsmooth = out.smooth_margin < 1e-9;

  if (with_derivs) {
    const Primitive& prim = scene.prims[out.prim];
    const Matrix3d R_o = o.q.toRotationMatrix();
    const Matrix3d R_lp = prim.local.q.toRotationMatrix();
    const Matrix3d R_wp = R_o * R_lp;

    const Vector3d g_body = R_lp * best.grad;
    out.dphi_dp = R_o * g_body;
    out.dphi_dx = -out.dphi_dp;
    out.dphi_dw = g_body.cross(p_body);
    out.d2phi_dp2 = R_wp * best.hess * R_wp.transpose();
    out.dgrad_dw = -R_o * skew(g_body) +
                   R_wp * best.hess * R_lp.transpose() * skew(p_body);
  }
  return out;
}

double scene_bounding_radius(const SdfScene& scene) {
  double r = 0;
  for (const Primitive& prim : scene.prims) {
    double ext = 0;
    switch (prim.kind) {
      case PrimitiveKind::Sphere:
        ext = prim.size.x();
        break;
      case PrimitiveKind::Box:
        ext = prim.size.norm();
        break;
      case PrimitiveKind::Cylinder:
        ext = std::hypot(prim.size.x(), prim.size.y());
        break;
    }
    r = std::max(r, prim.local.p.norm() + ext);
  }
  return r;
}

}  // namespace rollopt
