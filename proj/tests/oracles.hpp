#pragma once

// Test-only reference computations, independent of the interior-point path.

#include <cmath>
#include <limits>
#include <random>

#include "tvcbf/control.hpp"
#include "tvcbf/distance.hpp"
#include "tvcbf/primitive.hpp"

namespace tvcbf::testing {

/// Bisection on alpha: the scaled bodies intersect iff GJK reports no gap.
inline double bisection_alpha(const ConvexPrimitive& a, const Pose& pa, const ConvexPrimitive& b,
                              const Pose& pb, double tol = 1e-9) {
  auto touching = [&](double alpha) {
    return gjk_distance(a.scaled(alpha), pa, b.scaled(alpha), pb).distance <= 0.0;
  };
  double lo = 1e-6;
  double hi = 1.0;
  while (!touching(hi)) hi *= 2.0;
  while (touching(lo) && lo > 1e-12) lo *= 0.5;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (touching(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(u(rng), u(rng), u(rng));
}

inline ConvexPrimitive random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  return ConvexPrimitive::box(Vec3(u(rng), u(rng), u(rng)));
}

inline ConvexPrimitive random_primitive(std::mt19937_64& rng, PrimitiveKind kind) {
  std::uniform_real_distribution<double> u(0.2, 1.5);
  switch (kind) {
    case PrimitiveKind::kSphere: return ConvexPrimitive::sphere(u(rng));
    case PrimitiveKind::kCapsule: return ConvexPrimitive::capsule(u(rng), u(rng));
    case PrimitiveKind::kPolytope: return random_box(rng);
  }
  return ConvexPrimitive::sphere(1.0);
}

// Projection onto {a_i^T u >= c_i} by enumerating candidate active sets.
inline Eigen::VectorXd enumerate_projection(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows) {
  const int m = static_cast<int>(rows.size());
  Eigen::VectorXd best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) s.push_back(i);
    Eigen::VectorXd u = u_ref;
    if (!s.empty()) {
      Eigen::MatrixXd a(s.size(), u_ref.size());
      Eigen::VectorXd c(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        a.row(k) = rows[s[k]].a.transpose();
        c[k] = rows[s[k]].c;
      }
      const Eigen::MatrixXd aat = a * a.transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(aat);
      if (lu.rank() < static_cast<int>(s.size())) continue;
      const Eigen::VectorXd lambda = lu.solve(c - a * u_ref);
      if ((lambda.array() < -1e-12).any()) continue;
      u = u_ref + a.transpose() * lambda;
    }
    bool feasible = true;
    for (const auto& r : rows) feasible = feasible && r.a.dot(u) >= r.c - 1e-10;
    if (!feasible) continue;
    const double d = (u - u_ref).norm();
    if (d < best_dist) {
      best_dist = d;
      best = u;
    }
  }
  return best;
}

}  // namespace tvcbf::testing
