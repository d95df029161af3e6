#pragma once

// Shared hand-built fixtures for kinematics/contact/constraint tests.

#include <random>

#include "rollopt/kinematics.hpp"

namespace rollopt::testing {

// Planar two-joint finger in the xy plane, both joints about +z,
// link lengths l1, l2; the tip frame sits at the end of link 2.
inline Finger planar_finger(const Vector3d& base, double l1, double l2,
                            double link_mass = 0.0) {
  Finger f;
  f.name = "planar";
  f.origin = Pose{base, Quaterniond::Identity()};
  Joint j1;
  j1.axis = Vector3d::UnitZ();
  j1.lower = -2.8;
  j1.upper = 2.8;
  Joint j2 = j1;
  j2.origin.p = Vector3d(l1, 0, 0);
  f.joints = {j1, j2};
  LinkInertia i1{link_mass, Vector3d(l1 / 2, 0, 0)};
  LinkInertia i2{link_mass, Vector3d(l2 / 2, 0, 0)};
  f.links = {i1, i2};
  f.tip_offset = Pose{Vector3d(l2, 0, 0), Quaterniond::Identity()};
  return f;
}

// Three-joint spatial finger: yaw about z, then two pitches about y.
inline Finger spatial_finger(const Pose& origin, double l1, double l2, double l3,
                             double link_mass = 0.02) {
  Finger f;
  f.name = "spatial";
  f.origin = origin;
  Joint j1;
  j1.axis = Vector3d::UnitZ();
  Joint j2;
  j2.axis = Vector3d::UnitY();
  Joint j3;
  j3.axis = Vector3d::UnitY();
  j3.origin.p = Vector3d(l2, 0, 0);
  j2.origin.p = Vector3d(l1, 0, 0);
  f.joints = {j1, j2, j3};
  f.links = {{link_mass, Vector3d(l1 / 2, 0, 0)},
             {link_mass, Vector3d(l2 / 2, 0, 0)},
             {link_mass, Vector3d(l3 / 2, 0, 0)}};
  f.tip_offset = Pose{Vector3d(l3, 0, 0), Quaterniond::Identity()};
  return f;
}

inline KinematicChain two_finger_chain() {
  KinematicChain c;
  c.fingers.push_back(planar_finger(Vector3d(0.1, 0.1, 0.03), 0.06, 0.05, 0.03));
  c.fingers.push_back(
      spatial_finger(Pose{Vector3d(-0.1, 0, 0.05), Quaterniond::Identity()}, 0.05, 0.05, 0.04));
  return c;
}

// Rolling-wheel rig: joint 1 sweeps an arm about world z, joint 2 spins a
// sphere of radius r mounted at arm radius R about the (rotating) radial
// axis. The sphere grazes the z=0 plane; pure rolling on a plane spinning at
// Omega about z requires q2dot = (Omega - q1dot) R / r.
inline Finger wheel_finger(double arm_radius, double sphere_radius) {
  Finger f;
  f.name = "wheel";
  Joint j1;
  j1.axis = Vector3d::UnitZ();
  j1.lower = -50;
  j1.upper = 50;
  j1.action_limit = 10;
  Joint j2 = j1;
  j2.axis = Vector3d::UnitX();
  j2.origin.p = Vector3d(arm_radius, 0, sphere_radius);
  f.joints = {j1, j2};
  f.links = {{0.0, Vector3d::Zero()}, {0.0, Vector3d::Zero()}};
  return f;
}

// the link-2 material point currently at the bottom of the wheel sphere
inline Vector3d wheel_contact_point(double sphere_radius, double q2) {
  return Eigen::AngleAxisd(-q2, Vector3d::UnitX()) * Vector3d(0, 0, -sphere_radius);
}

inline Eigen::VectorXd rand_config(const KinematicChain& c, std::mt19937_64& rng,
                                   double scale = 0.8) {
  std::normal_distribution<double> n(0, scale);
  Eigen::VectorXd q(c.nq());
  for (int i = 0; i < q.size(); ++i) q[i] = n(rng);
  return q;
}

}  // namespace rollopt::testing
