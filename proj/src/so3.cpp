#include "rollopt/so3.hpp"

#include <cmath>

namespace rollopt {

Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Quaterniond quat_exp(const Vector3d& w) {
  const double th = w.norm();
  double c, s;  // cos(th/2), sin(th/2)/th
  if (th < 1e-8) {
    c = 1.0 - th * th / 8.0;
    s = 0.5 - th * th / 48.0;
  } else {
    c = std::cos(0.5 * th);
    s = std::sin(0.5 * th) / th;
  }
  Quaterniond q(c, s * w.x(), s * w.y(), s * w.z());
  q.normalize();
  return q;
}

Vector3d quat_log(const Quaterniond& q_in) {
  Quaterniond q = q_in;
  if (q.w() < 0) q.coeffs() *= -1.0;  // continuous branch, angle <= pi
  const Vector3d v(q.x(), q.y(), q.z());
  const double n = v.norm();
  if (n < 1e-10) return 2.0 * v / q.w();
  return (2.0 * std::atan2(n, q.w()) / n) * v;
}

Matrix3d right_jacobian_inv(const Vector3d& phi) {
  const double th2 = phi.squaredNorm();
  const Matrix3d K = skew(phi);
  double c;  // coefficient of K^2
  if (th2 < 1e-8) {
    c = 1.0 / 12.0 + th2 / 720.0;
  } else {
    const double th = std::sqrt(th2);
    c = 1.0 / th2 - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  }
  return Matrix3d::Identity() + 0.5 * K + c * K * K;
}

Quaterniond quat_retract(const Quaterniond& q, const Vector3d& delta) {
  Quaterniond r = q * quat_exp(delta);
  r.normalize();
  return r;
}

double quat_angle(const Quaterniond& a, const Quaterniond& b) {
  return quat_log(a.conjugate() * b).norm();
}

AngularVelocity angular_velocity(const Quaterniond& q_t, const Quaterniond& q_t1,
                                 double dt) {
  AngularVelocity out;
  const Quaterniond rel = q_t1 * q_t.conjugate();
  const Vector3d phi = quat_log(rel);
  out.omega = phi / dt;
  const Matrix3d Jri = right_jacobian_inv(phi);
  const Matrix3d Rt = q_t.toRotationMatrix();
  out.dphi_dw_t1 = Jri * Rt;
  out.dphi_dw_t = -out.dphi_dw_t1;
  out.smooth_margin = M_PI - phi.norm();
  return out;
}

}  // namespace rollopt
