#pragma once

#include "tvcbf/primitive.hpp"

namespace tvcbf {

struct DistanceResult {
  /// Euclidean gap between the bodies; nonpositive when they touch or overlap.
  /// Penetration depth is not computed, so negative values are only a sign.
  double distance = 0.0;
  bool intersecting = false;
  Vec3 witness_a = Vec3::Zero();
  Vec3 witness_b = Vec3::Zero();
  int iterations = 0;
};

/// GJK distance between two posed primitives from their support functions.
/// Spheres and capsules are handled as a point/segment core plus a margin.
/// Independent of the scaling solver.
DistanceResult gjk_distance(const ConvexPrimitive& prim_a, const Pose& pose_a, const ConvexPrimitive& prim_b,
                            const Pose& pose_b);

/// World-frame support point of the primitive's core (margin excluded).
Vec3 core_support(const ConvexPrimitive& prim, const Pose& pose, const Vec3& direction);

double core_margin(const ConvexPrimitive& prim);

}  // namespace tvcbf
