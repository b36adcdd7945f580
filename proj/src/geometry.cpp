#include "tvcbf/geometry.hpp"

#include <cmath>

namespace tvcbf {

bool Pose::valid(double tol) const {
  if (!position.allFinite() || !orientation.coeffs().allFinite()) return false;
  return std::abs(orientation.norm() - 1.0) <= tol;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Quat quat_exp(const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-12) {
    // second-order expansion keeps the map smooth through zero
    Quat q(1.0 - angle * angle / 8.0, 0.5 * rotation_vector.x(), 0.5 * rotation_vector.y(),
           0.5 * rotation_vector.z());
    return q.normalized();
  }
  const Vec3 axis = rotation_vector / angle;
  return Quat(Eigen::AngleAxisd(angle, axis));
}

Vec3 quat_log(const Quat& q_in) {
  Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

Quat canonical(const Quat& q) {
  Quat out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Quat retract(const Quat& q, const Vec3& delta) { return (quat_exp(delta) * q).normalized(); }

Quat rot_z(double angle) { return Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ())); }

}  // namespace tvcbf
