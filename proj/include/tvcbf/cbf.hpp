#pragma once

#include <limits>

#include "tvcbf/primitive.hpp"
#include "tvcbf/scaling.hpp"

namespace tvcbf {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct CbfConfig {
  double gamma = 1.0;
  double beta = 1.03;
  /// Lookahead for the time partial; equals the control tick.
  double dt = 0.01;
  /// Mahalanobis bound for the noise-robust configuration.
  double k = 0.0;
  /// Actuation inflation gain.
  double b = 0.0;
  bool noise_robust = false;
  bool actuation_inflated = false;
  bool time_varying = true;
  /// Inflated value enters only the right-hand side of the constraint.
  bool rhs_only = false;
  /// Use the plain value wherever the inflated one falls below it.
  bool plain_floor = true;
  /// Step the worst-case point along -h_r instead of +h_r.
  bool flip_worst_case = false;
  /// Pairs with alpha* - beta above this are dropped from the QP.
  double prune_threshold = 50.0;
  GradientMethod gradient = GradientMethod::kAnalytic;

  /// Throws ParameterError on a violated invariant.
  void validate() const;
};

/// One robot segment against one obstacle at a control tick.
struct BodyPairState {
  int robot_index = 0;
  int obstacle_index = 0;
  const ConvexPrimitive* robot = nullptr;
  const ConvexPrimitive* obstacle = nullptr;
  Pose robot_pose;
  Vec3 robot_velocity = Vec3::Zero();
  /// d[segment position; segment rotation vector]/dx, 6 x n.
  Eigen::MatrixXd pose_jacobian;
  Pose obstacle_pose;
  Vec3 obstacle_velocity = Vec3::Zero();
  Pose obstacle_pose_next;
  Mat3 obstacle_covariance = Mat3::Zero();
};

struct ConstraintRow {
  Eigen::VectorXd a;
  double c = 0.0;
  int robot_index = 0;
  int obstacle_index = 0;
  double h = 0.0;
  double dh_dt = 0.0;
  double alpha_star = 0.0;
  /// Degenerate scaling: the controller must stop.
  bool emergency = false;
  bool worst_case_fallback = false;
};

/// Everything the constraint needs for one pair.
struct CbfEvaluation {
  double alpha_star = 0.0;
  /// Value used in the gradient and time partial.
  double h = 0.0;
  /// Value multiplied by gamma on the right-hand side.
  double h_rhs = 0.0;
  double dh_dt = 0.0;
  /// dh/d[segment position; segment rotation vector].
  Vec6 dh_dpose = Vec6::Zero();
  double a_v = 0.0;
  Pose effective_obstacle;
  bool degenerate = false;
  bool worst_case_fallback = false;
};

inline constexpr double kUnsafeSentinel = -std::numeric_limits<double>::infinity();

CbfEvaluation evaluate_cbf(const BodyPairState& pair, const CbfConfig& cfg);

/// alpha* - beta at the effective obstacle configuration; -inf when degenerate.
double cbf_value(const BodyPairState& pair, const CbfConfig& cfg);

double cbf_time_partial(const BodyPairState& pair, const CbfConfig& cfg);

struct WorstCase {
  Vec3 position = Vec3::Zero();
  bool fallback = false;
};

/// mu + k h_r / sqrt(h_r^T cov^-1 h_r) with h_r the normalized gradient.
WorstCase worst_case_position(const Vec3& mean, const Mat3& covariance, double k, const Vec3& gradient);

/// Worst-case shift for a pair, taken along the robot-position gradient of alpha*.
WorstCase worst_case_position(const BodyPairState& pair, const CbfConfig& cfg);

struct BruteForceResult {
  Vec3 position = Vec3::Zero();
  double h = 0.0;
};

/// Grid search for the h-minimizing obstacle position inside the Mahalanobis-k
/// ellipsoid. `planar` restricts the search to the xy plane.
BruteForceResult brute_force_worst_config(const BodyPairState& pair, double beta, double k,
                                          const Mat3& covariance, int grid_resolution, bool planar = false);

/// (v_o - v_r)^T (p_r - p_o).
double relative_approach(const Vec3& robot_position, const Vec3& robot_velocity, const Vec3& obstacle_position,
                         const Vec3& obstacle_velocity);

/// (1 + b) a_v alpha* - beta.
double inflated_cbf_value(const BodyPairState& pair, const CbfConfig& cfg);

/// Row a^T u >= c of  dh/dx (F + G u) + dh/dt >= -gamma h.
ConstraintRow constraint_row(const BodyPairState& pair, const CbfConfig& cfg, const Eigen::VectorXd& drift,
                             const Eigen::MatrixXd& input_matrix);

}  // namespace tvcbf
