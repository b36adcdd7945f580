#include "tvcbf/primitive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tvcbf {
namespace {

constexpr double kVertexTol = 1e-9;

void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

// A pointed polyhedral cone {d : A d <= 0} in R^3 is nontrivial iff one of its
// extreme rays exists, and each extreme ray lies on two independent facets.
bool has_recession_direction(const Eigen::Matrix<double, Eigen::Dynamic, 3>& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) return true;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Vec3 d = a.row(i).transpose().cross(a.row(j).transpose());
      if (d.norm() < 1e-10) continue;
      d.normalize();
      for (double sign : {1.0, -1.0}) {
        if (((a * (sign * d)).array() <= 1e-10).all()) return true;
      }
    }
  }
  return false;
}

std::vector<Vec3> enumerate_vertices(const Eigen::Matrix<double, Eigen::Dynamic, 3>& a,
                                     const Eigen::VectorXd& b) {
  std::vector<Vec3> out;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (Eigen::Index k = j + 1; k < n; ++k) {
        Mat3 m;
        m.row(0) = a.row(i);
        m.row(1) = a.row(j);
        m.row(2) = a.row(k);
        if (std::abs(m.determinant()) < 1e-10) continue;
        const Vec3 v = m.partialPivLu().solve(Vec3(b(i), b(j), b(k)));
        if (((a * v - b).array() > kVertexTol * (1.0 + b.cwiseAbs().maxCoeff())).any()) continue;
        const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Vec3& w) {
          return (w - v).norm() < 1e-9 * (1.0 + v.norm());
        });
        if (!duplicate) out.push_back(v);
      }
    }
  }
  return out;
}

}  // namespace

ConvexPrimitive ConvexPrimitive::sphere(double radius) {
  require(std::isfinite(radius) && radius > 0.0, "sphere radius must be positive");
  return ConvexPrimitive(Sphere{radius});
}

ConvexPrimitive ConvexPrimitive::capsule(double half_length, double radius) {
  require(std::isfinite(radius) && radius > 0.0, "capsule radius must be positive");
  require(std::isfinite(half_length) && half_length >= 0.0, "capsule half-length must be >= 0");
  return ConvexPrimitive(Capsule{half_length, radius});
}

ConvexPrimitive ConvexPrimitive::polytope(const Eigen::Matrix<double, Eigen::Dynamic, 3>& normals,
                                          const Eigen::VectorXd& offsets) {
  require(normals.rows() == offsets.size(), "polytope normals/offsets size mismatch");
  require(normals.rows() >= 4, "a bounded polytope needs at least 4 halfspaces");
  require(normals.allFinite() && offsets.allFinite(), "polytope parameters must be finite");
  Polytope poly;
  poly.normals = normals;
  poly.offsets = offsets;
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double len = normals.row(i).norm();
    require(len > 1e-12, "polytope normal rows must be nonzero");
    poly.normals.row(i) /= len;
    poly.offsets(i) /= len;
  }
  require((poly.offsets.array() > 0.0).all(), "polytope must contain the body origin in its interior");
  require(!has_recession_direction(poly.normals), "polytope must be bounded");
  poly.vertices = enumerate_vertices(poly.normals, poly.offsets);
  require(poly.vertices.size() >= 4, "polytope is degenerate");
  return ConvexPrimitive(std::move(poly));
}

ConvexPrimitive ConvexPrimitive::box(const Vec3& size) {
  require((size.array() > 0.0).all(), "box dimensions must be positive");
  Eigen::Matrix<double, 6, 3> a;
  a << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
  Eigen::Matrix<double, 6, 1> b;
  b << size.x() / 2, size.x() / 2, size.y() / 2, size.y() / 2, size.z() / 2, size.z() / 2;
  return polytope(a, b);
}

PrimitiveKind ConvexPrimitive::kind() const {
  switch (shape_.index()) {
    case 0: return PrimitiveKind::kSphere;
    case 1: return PrimitiveKind::kPolytope;
    default: return PrimitiveKind::kCapsule;
  }
}

double ConvexPrimitive::bounding_radius() const {
  switch (kind()) {
    case PrimitiveKind::kSphere: return as_sphere().radius;
    case PrimitiveKind::kCapsule: return as_capsule().half_length + as_capsule().radius;
    case PrimitiveKind::kPolytope: {
      double r = 0.0;
      for (const auto& v : as_polytope().vertices) r = std::max(r, v.norm());
      return r;
    }
  }
  return 0.0;
}

ConvexPrimitive ConvexPrimitive::scaled(double factor) const {
  require(factor > 0.0, "scale factor must be positive");
  switch (kind()) {
    case PrimitiveKind::kSphere: return sphere(as_sphere().radius * factor);
    case PrimitiveKind::kCapsule:
      return capsule(as_capsule().half_length * factor, as_capsule().radius * factor);
    case PrimitiveKind::kPolytope: {
      Polytope poly = as_polytope();
      poly.offsets *= factor;
      for (auto& v : poly.vertices) v *= factor;
      return ConvexPrimitive(std::move(poly));
    }
  }
  return *this;
}

std::string ConvexPrimitive::describe() const {
  std::ostringstream os;
  switch (kind()) {
    case PrimitiveKind::kSphere: os << "sphere(r=" << as_sphere().radius << ")"; break;
    case PrimitiveKind::kCapsule:
      os << "capsule(half_length=" << as_capsule().half_length << ", r=" << as_capsule().radius << ")";
      break;
    case PrimitiveKind::kPolytope: os << "polytope(" << as_polytope().normals.rows() << " faces)"; break;
  }
  return os.str();
}

bool scaled_set_contains(const ConvexPrimitive& prim, const Pose& pose, double alpha, const Vec3& p,
                         double tol) {
  require(alpha > 0.0, "scaling factor must be positive");
  require(pose.valid(), "pose orientation must be a unit quaternion");
  const Vec3 local = pose.orientation.conjugate() * (p - pose.position);
  switch (prim.kind()) {
    case PrimitiveKind::kSphere: return local.norm() <= alpha * prim.as_sphere().radius + tol;
    case PrimitiveKind::kPolytope: {
      const auto& poly = prim.as_polytope();
      return ((poly.normals * local - alpha * poly.offsets).array() <= tol).all();
    }
    case PrimitiveKind::kCapsule: {
      const auto& cap = prim.as_capsule();
      const double s = std::clamp(local.z(), -alpha * cap.half_length, alpha * cap.half_length);
      return (local - Vec3(0.0, 0.0, s)).norm() <= alpha * cap.radius + tol;
    }
  }
  return false;
}

}  // namespace tvcbf
