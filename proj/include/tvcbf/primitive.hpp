#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tvcbf/geometry.hpp"

namespace tvcbf {

/// Raised when shape, filter, or controller parameters violate their invariants.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

struct Sphere {
  double radius = 1.0;
};

/// Bounded halfspace polytope {y : A y <= b} in the body frame. Rows of A are
/// unit normals and the body origin is strictly interior (b > 0).
struct Polytope {
  Eigen::Matrix<double, Eigen::Dynamic, 3> normals;
  Eigen::VectorXd offsets;
  std::vector<Vec3> vertices;
};

/// Segment of half-length `half_length` along the body z axis, swept by a ball.
struct Capsule {
  double half_length = 0.0;
  double radius = 1.0;
};

enum class PrimitiveKind { kSphere, kPolytope, kCapsule };

class ConvexPrimitive {
 public:
  static ConvexPrimitive sphere(double radius);
  static ConvexPrimitive capsule(double half_length, double radius);
  /// Rows are normalized on construction; throws ParameterError if the set is
  /// unbounded or does not contain the origin in its interior.
  static ConvexPrimitive polytope(const Eigen::Matrix<double, Eigen::Dynamic, 3>& normals,
                                  const Eigen::VectorXd& offsets);
  /// Axis-aligned box with full edge lengths `size`, centered on the body origin.
  static ConvexPrimitive box(const Vec3& size);

  PrimitiveKind kind() const;
  const Sphere& as_sphere() const { return std::get<Sphere>(shape_); }
  const Polytope& as_polytope() const { return std::get<Polytope>(shape_); }
  const Capsule& as_capsule() const { return std::get<Capsule>(shape_); }

  /// Radius of the smallest origin-centered ball containing the shape.
  double bounding_radius() const;

  /// Returns a copy with every size parameter multiplied by `factor`.
  ConvexPrimitive scaled(double factor) const;

  std::string describe() const;

 private:
  explicit ConvexPrimitive(std::variant<Sphere, Polytope, Capsule> s) : shape_(std::move(s)) {}
  std::variant<Sphere, Polytope, Capsule> shape_;
};

/// Membership of `p` in the alpha-scaled body (scaling about the body origin).
bool scaled_set_contains(const ConvexPrimitive& prim, const Pose& pose, double alpha, const Vec3& p,
                         double tol = 1e-9);

}  // namespace tvcbf
