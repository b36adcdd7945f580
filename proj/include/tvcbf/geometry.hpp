#pragma once

#include <Eigen/Dense>

namespace tvcbf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Position and orientation of a body frame expressed in the inertial frame.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& p, const Quat& q = Quat::Identity()) : position(p), orientation(q) {}

  Mat3 rotation() const { return orientation.toRotationMatrix(); }

  /// Maps a body-frame point into the inertial frame.
  Vec3 transform(const Vec3& body_point) const { return position + orientation * body_point; }

  bool valid(double tol = 1e-9) const;
};

Mat3 skew(const Vec3& v);

/// Quaternion exponential of a rotation vector (axis * angle).
Quat quat_exp(const Vec3& rotation_vector);

/// Rotation vector of a unit quaternion, shortest-arc.
Vec3 quat_log(const Quat& q);

/// Renormalizes and flips sign so the scalar part is nonnegative.
Quat canonical(const Quat& q);

/// Applies a world-frame tangent perturbation: exp(delta) * q.
Quat retract(const Quat& q, const Vec3& delta);

Quat rot_z(double angle);

}  // namespace tvcbf
