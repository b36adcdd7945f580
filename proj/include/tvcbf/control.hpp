#pragma once

#include <set>
#include <utility>
#include <vector>

#include "tvcbf/cbf.hpp"
#include "tvcbf/qp.hpp"

namespace tvcbf {

struct ControlBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ControlBox symmetric(int dim, double limit);
  static ControlBox unbounded(int dim);
  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& u) const;
  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const;
};

struct QpResult {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::kInfeasible;
  /// Indices into the row batch that ended up active.
  std::vector<int> active_rows;
  /// Multiplier per row of the batch.
  Eigen::VectorXd row_duals;
  double solve_time = 0.0;
  int iterations = 0;
};

/// min |u - u_ref|^2 s.t. a_i^T u >= c_i and box bounds.
QpResult tvcbf_qp(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows, const ControlBox& box,
                  const std::vector<int>& warm_rows = {});

/// Box-feasible control maximizing the smallest row margin a_i^T u - c_i,
/// lightly regularized toward u_ref.
Eigen::VectorXd infeasible_fallback(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows,
                                    const ControlBox& box);

struct FilterResult {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::kOptimal;
  bool fallback = false;
  bool emergency = false;
  int rows_used = 0;
  double solve_time = 0.0;
};

/// Per-loop safety filter with pruning and warm starts across ticks.
class SafetyFilter {
 public:
  SafetyFilter(CbfConfig cfg, ControlBox box) : cfg_(cfg), box_(std::move(box)) {}

  FilterResult filter(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows);

  const CbfConfig& config() const { return cfg_; }
  const ControlBox& box() const { return box_; }

 private:
  CbfConfig cfg_;
  ControlBox box_;
  std::set<std::pair<int, int>> warm_;
};

Eigen::VectorXd proportional_reference(const Eigen::VectorXd& position, const Eigen::VectorXd& target, double kp);

Eigen::VectorXd pd_reference(const Eigen::VectorXd& q, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& dq,
                             const Eigen::VectorXd& kp, const Eigen::VectorXd& kd);

struct MpcConfig {
  double horizon = 1.5;
  double sample_time = 0.05;
  double d_risk = 1.5;
  double d_obs = 1.5;
  double w_target = 0.1;
  double w_effort = 0.1;
  double w_avoid = 10.0;
  double robot_radius = 0.5;
  double obstacle_radius = 1.5;

  int steps() const;
  void validate() const;
};

struct MpcResult {
  Eigen::VectorXd u;
  /// Planned positions x_1 .. x_N.
  std::vector<Eigen::VectorXd> plan;
  QpStatus status = QpStatus::kOptimal;
  int avoidance_rows = 0;
  double solve_time = 0.0;
};

/// Linear MPC with integrator dynamics and sphere half-space avoidance.
/// `obstacle_prediction[k]` is the obstacle center at step k + 1; `nominal`
/// (same length, optional) is the robot path used to place the half-spaces.
MpcResult mpc_baseline(const Eigen::VectorXd& position, const Eigen::VectorXd& target,
                       const std::vector<Eigen::VectorXd>& obstacle_prediction, const MpcConfig& cfg,
                       const ControlBox& box, const std::vector<Eigen::VectorXd>& nominal = {});

/// Receding-horizon wrapper that reuses the previous plan as the nominal path.
class MpcController {
 public:
  MpcController(MpcConfig cfg, ControlBox box) : cfg_(cfg), box_(std::move(box)) { cfg_.validate(); }

  MpcResult step(const Eigen::VectorXd& position, const Eigen::VectorXd& target,
                 const std::vector<Eigen::VectorXd>& obstacle_prediction);

  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  ControlBox box_;
  std::vector<Eigen::VectorXd> previous_;
};

}  // namespace tvcbf
