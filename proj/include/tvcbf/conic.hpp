#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace tvcbf {

/// Dense cone program
///
///   minimize    c^T x
///   subject to  G x + s = h,   s in K
///
/// where K is the product of a nonnegative orthant of dimension
/// `linear_rows` (the first rows of G) followed by second-order cones
/// {(t, y) : ||y|| <= t} of the listed dimensions.
struct ConeProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  int linear_rows = 0;
  std::vector<int> soc_dims;

  int num_rows() const;
  /// Barrier degree: one per orthant row plus one per cone.
  int degree() const;
};

struct ConeSolverSettings {
  int max_iterations = 200;
  double gap_tol = 1e-12;
  double feasibility_tol = 1e-10;
  /// Accuracy accepted when the iteration stalls before reaching gap_tol.
  double fallback_tol = 1e-8;
};

enum class ConeStatus { kOptimal, kMaxIter, kNumerical };

struct ConeSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd s;
  Eigen::VectorXd z;
  ConeStatus status = ConeStatus::kNumerical;
  int iterations = 0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Primal-dual interior-point method with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector step. `x0`, when given, must be strictly
/// feasible (h - G x0 in the interior of K).
ConeSolution solve_cone_program(const ConeProgram& prog, const std::optional<Eigen::VectorXd>& x0 = {},
                                const ConeSolverSettings& settings = {});

namespace cone_detail {

// Exposed for testing the cone algebra.
struct SocScaling {
  Eigen::MatrixXd w;
  Eigen::MatrixXd w_inv;
};
SocScaling soc_nt_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z);
/// Largest t >= 0 with x + t d in the (closed) second-order cone; +inf if unbounded.
double soc_max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d);

}  // namespace cone_detail

}  // namespace tvcbf
