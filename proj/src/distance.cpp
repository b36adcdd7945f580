#include "tvcbf/distance.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace tvcbf {

Vec3 core_support(const ConvexPrimitive& prim, const Pose& pose, const Vec3& direction) {
  switch (prim.kind()) {
    case PrimitiveKind::kSphere: return pose.position;
    case PrimitiveKind::kCapsule: {
      const Vec3 axis = pose.orientation * Vec3::UnitZ();
      const double half = prim.as_capsule().half_length;
      return pose.position + (axis.dot(direction) >= 0.0 ? half : -half) * axis;
    }
    case PrimitiveKind::kPolytope: {
      const Vec3 local_dir = pose.orientation.conjugate() * direction;
      const auto& verts = prim.as_polytope().vertices;
      std::size_t best = 0;
      double best_dot = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < verts.size(); ++i) {
        const double d = verts[i].dot(local_dir);
        if (d > best_dot) {
          best_dot = d;
          best = i;
        }
      }
      return pose.transform(verts[best]);
    }
  }
  return pose.position;
}

double core_margin(const ConvexPrimitive& prim) {
  switch (prim.kind()) {
    case PrimitiveKind::kSphere: return prim.as_sphere().radius;
    case PrimitiveKind::kCapsule: return prim.as_capsule().radius;
    case PrimitiveKind::kPolytope: return 0.0;
  }
  return 0.0;
}

namespace {

struct Vertex {
  Vec3 w;  // a - b
  Vec3 a;
  Vec3 b;
};

struct Closest {
  Vec3 v;
  std::array<double, 4> lambda{};
  unsigned mask = 0;
};

// Exhaustive search over faces of a simplex with at most four vertices.
Closest closest_on_simplex(const std::array<Vertex, 4>& s, int n) {
  Closest best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    int idx[4];
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx[k++] = i;
    }
    std::array<double, 4> lam{};
    Vec3 v;
    if (k == 1) {
      lam[idx[0]] = 1.0;
      v = s[idx[0]].w;
    } else {
      const Vec3 w0 = s[idx[0]].w;
      Eigen::Matrix<double, 3, Eigen::Dynamic> d(3, k - 1);
      for (int j = 1; j < k; ++j) d.col(j - 1) = s[idx[j]].w - w0;
      const Eigen::MatrixXd dtd = d.transpose() * d;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(dtd);
      lu.setThreshold(1e-12);
      if (lu.rank() < k - 1) continue;
      const Eigen::VectorXd mu = lu.solve(-d.transpose() * w0);
      double sum = 0.0;
      bool ok = true;
      for (int j = 1; j < k; ++j) {
        lam[idx[j]] = mu(j - 1);
        sum += mu(j - 1);
        if (mu(j - 1) < -1e-12) ok = false;
      }
      lam[idx[0]] = 1.0 - sum;
      if (lam[idx[0]] < -1e-12) ok = false;
      if (!ok) continue;
      v = w0 + d * mu;
    }
    const double nrm = v.squaredNorm();
    if (nrm < best_norm) {
      best_norm = nrm;
      best.v = v;
      best.lambda = lam;
      best.mask = mask;
    }
  }
  return best;
}

}  // namespace

DistanceResult gjk_distance(const ConvexPrimitive& prim_a, const Pose& pose_a, const ConvexPrimitive& prim_b,
                            const Pose& pose_b) {
  auto support = [&](const Vec3& d) {
    Vertex vx;
    vx.a = core_support(prim_a, pose_a, d);
    vx.b = core_support(prim_b, pose_b, -d);
    vx.w = vx.a - vx.b;
    return vx;
  };

  std::array<Vertex, 4> simplex;
  int n = 1;
  simplex[0] = support(pose_b.position - pose_a.position);
  Closest cl;
  cl.v = simplex[0].w;
  cl.lambda = {1.0, 0.0, 0.0, 0.0};
  cl.mask = 1;

  DistanceResult out;
  const double scale = 1.0 + prim_a.bounding_radius() + prim_b.bounding_radius();
  double core = 0.0;
  for (int it = 0; it < 128; ++it) {
    out.iterations = it + 1;
    const double vnorm2 = cl.v.squaredNorm();
    if (vnorm2 < 1e-24 * scale * scale) {
      core = 0.0;
      break;
    }
    const Vertex w = support(-cl.v);
    // Converged when the new support point does not improve the lower bound.
    if (vnorm2 - cl.v.dot(w.w) <= 1e-14 * std::max(vnorm2, 1e-12 * scale * scale)) {
      core = std::sqrt(vnorm2);
      break;
    }
    bool duplicate = false;
    for (int i = 0; i < n; ++i) {
      if ((simplex[i].w - w.w).squaredNorm() < 1e-28 * scale * scale) duplicate = true;
    }
    if (duplicate || n == 4) {
      core = std::sqrt(vnorm2);
      break;
    }
    simplex[n++] = w;
    cl = closest_on_simplex(simplex, n);
    // Keep only the supporting face.
    std::array<Vertex, 4> reduced;
    std::array<double, 4> lam{};
    int m = 0;
    for (int i = 0; i < n; ++i) {
      if (cl.mask & (1u << i)) {
        reduced[m] = simplex[i];
        lam[m] = cl.lambda[i];
        ++m;
      }
    }
    simplex = reduced;
    n = m;
    cl.lambda = lam;
    cl.mask = (1u << m) - 1u;
    if (n == 4) {
      core = 0.0;
      cl.v.setZero();
      break;
    }
    core = cl.v.norm();
  }

  Vec3 wa = Vec3::Zero(), wb = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    wa += cl.lambda[i] * simplex[i].a;
    wb += cl.lambda[i] * simplex[i].b;
  }
  const double ra = core_margin(prim_a);
  const double rb = core_margin(prim_b);
  out.distance = core - ra - rb;
  out.intersecting = out.distance <= 0.0;
  if (core > 0.0) {
    const Vec3 dir = (wb - wa) / core;
    out.witness_a = wa + ra * dir;
    out.witness_b = wb - rb * dir;
  } else {
    out.witness_a = wa;
    out.witness_b = wb;
  }
  return out;
}

}  // namespace tvcbf
