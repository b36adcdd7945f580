#pragma once

#include <stdexcept>
#include <string>

#include "tvcbf/conic.hpp"
#include "tvcbf/primitive.hpp"

namespace tvcbf {

enum class ScalingStatus { kOptimal, kInfeasible, kMaxIter, kDegenerate };

const char* to_string(ScalingStatus status);

/// Result of the minimum uniform scaling program between two bodies.
struct ScalingSolution {
  double alpha_star = 0.0;
  Vec3 p_star = Vec3::Zero();
  /// Solver variables: p (3), alpha, then one axial coordinate per capsule.
  Eigen::VectorXd primal;
  /// Cone multipliers, ordered as the rows of the assembled program.
  Eigen::VectorXd dual;
  ScalingStatus status = ScalingStatus::kDegenerate;
  int iterations = 0;
};

/// Gradient of alpha* with respect to one body's pose. The orientation part
/// is taken along a world-frame tangent, q -> exp(delta) * q.
struct PoseGradient {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();
};

struct PairGradient {
  PoseGradient a;
  PoseGradient b;
};

class GradientUndefined : public std::runtime_error {
 public:
  explicit GradientUndefined(const std::string& what) : std::runtime_error(what) {}
};

/// Origins closer than this make alpha* ill-defined.
inline constexpr double kDegenerateOriginDistance = 1e-9;

struct ScalingOptions {
  ConeSolverSettings solver;
  /// Use the closed form for sphere pairs.
  bool sphere_shortcut = true;
};

ScalingSolution min_scaling(const ConvexPrimitive& prim_a, const Pose& pose_a, const ConvexPrimitive& prim_b,
                            const Pose& pose_b, const ScalingOptions& options = {});

enum class GradientMethod { kFiniteDifference, kAnalytic };

/// Throws GradientUndefined for non-optimal or degenerate solutions.
PairGradient min_scaling_gradient(const ConvexPrimitive& prim_a, const Pose& pose_a,
                                  const ConvexPrimitive& prim_b, const Pose& pose_b,
                                  const ScalingSolution& solution,
                                  GradientMethod method = GradientMethod::kFiniteDifference);

/// Step sizes used by the finite-difference gradient.
inline constexpr double kPositionStep = 1e-6;
inline constexpr double kOrientationStep = 1e-6;

}  // namespace tvcbf
