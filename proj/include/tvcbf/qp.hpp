#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tvcbf {

enum class QpStatus { kOptimal, kInfeasible, kMaxIter };

const char* to_string(QpStatus status);

/// min 0.5 x^T H x + g^T x  s.t.  C^T x >= d   (one column of C per row).
struct DenseQp {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd constraints;
  Eigen::VectorXd lower;
};

struct DenseQpSolution {
  Eigen::VectorXd x;
  /// Multiplier per constraint, zero when inactive.
  Eigen::VectorXd duals;
  std::vector<int> active;
  QpStatus status = QpStatus::kInfeasible;
  int iterations = 0;
};

struct DenseQpSettings {
  double violation_tol = 1e-10;
  int max_iterations = 1000;
};

/// Dual active-set method of Goldfarb and Idnani. Constraints in
/// `preferred` are added first when violated.
DenseQpSolution solve_dense_qp(const DenseQp& qp, const std::vector<int>& preferred = {},
                               const DenseQpSettings& settings = {});

}  // namespace tvcbf
