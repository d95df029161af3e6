#include "rollopt/object_model.hpp"

#include "rollopt/so3.hpp"

namespace rollopt {

int ObjectModel::dof() const {
  switch (type) {
    case JointType::Free: return 6;
    case JointType::Revolute: return 1;
    case JointType::Spherical: return 3;
  }
  return 6;
}

Eigen::MatrixXd ObjectModel::tangent_basis(const Pose& o) const {
  switch (type) {
    case JointType::Free:
      return Eigen::MatrixXd::Identity(6, 6);
    case JointType::Revolute: {
      Eigen::MatrixXd T(6, 1);
      T.topRows(3) = axis.cross(o.p - anchor);
      T.bottomRows(3) = o.q.toRotationMatrix().transpose() * axis;
      return T;
    }
    case JointType::Spherical: {
      Eigen::MatrixXd T(6, 3);
      T.topRows(3) = o.q.toRotationMatrix() * skew(body_point);
      T.bottomRows(3) = Matrix3d::Identity();
      return T;
    }
  }
  return Eigen::MatrixXd::Identity(6, 6);
}

Pose ObjectModel::retract(const Pose& o, const Eigen::VectorXd& dz) const {
  Pose out = o;
  switch (type) {
    case JointType::Free:
      out.p += dz.head<3>();
      out.q = quat_retract(o.q, dz.tail<3>());
      break;
    case JointType::Revolute: {
      const Quaterniond rot = quat_exp(dz[0] * axis);
      out.p = anchor + rot * (o.p - anchor);
      out.q = (rot * o.q).normalized();
      break;
    }
    case JointType::Spherical:
      out.q = quat_retract(o.q, dz);
      out.p = anchor - out.q * body_point;
      break;
  }
  return out;
}

Eigen::VectorXd ObjectModel::difference(const Pose& a, const Pose& b) const {
  switch (type) {
    case JointType::Free: {
      Eigen::VectorXd z(6);
      z.head<3>() = b.p - a.p;
      z.tail<3>() = quat_log(a.q.conjugate() * b.q);
      return z;
    }
    case JointType::Revolute: {
      const Vector3d phi = quat_log(b.q * a.q.conjugate());  // world increment
      return Eigen::VectorXd::Constant(1, axis.dot(phi));
    }
    case JointType::Spherical:
      return quat_log(a.q.conjugate() * b.q);
  }
  return Eigen::VectorXd::Zero(6);
}

Pose ObjectModel::interpolate(const Pose& a, const Pose& b, double s) const {
  if (type == JointType::Free) {
    Pose out;
    out.p = (1.0 - s) * a.p + s * b.p;
    out.q = quat_retract(a.q, s * quat_log(a.q.conjugate() * b.q));
    return out;
  }
  return retract(a, s * difference(a, b));
}

Eigen::MatrixXd ObjectModel::wrench_projection() const {
  switch (type) {
    case JointType::Free:
      return Eigen::MatrixXd::Identity(6, 6);
    case JointType::Revolute: {
      Eigen::MatrixXd P(1, 6);
      P.leftCols(3) = -axis.transpose() * skew(anchor);
      P.rightCols(3) = axis.transpose();
      return P;
    }
    case JointType::Spherical: {
      Eigen::MatrixXd P(3, 6);
      P.leftCols(3) = -skew(anchor);
      P.rightCols(3) = Matrix3d::Identity();
      return P;
    }
  }
  return Eigen::MatrixXd::Identity(6, 6);
}

}  // namespace rollopt
