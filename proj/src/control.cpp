#include "tvcbf/control.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace tvcbf {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Appends the finite box bounds as rows of C^T x >= d, starting at column `col`.
int append_box(const ControlBox& box, int offset, Eigen::MatrixXd& c, Eigen::VectorXd& d, int col) {
  for (int i = 0; i < box.dim(); ++i) {
    if (std::isfinite(box.lower[i])) {
      c(offset + i, col) = 1.0;
      d[col++] = box.lower[i];
    }
    if (std::isfinite(box.upper[i])) {
      c(offset + i, col) = -1.0;
      d[col++] = -box.upper[i];
    }
  }
  return col;
}

int finite_bounds(const ControlBox& box) {
  int count = 0;
  for (int i = 0; i < box.dim(); ++i) {
    count += std::isfinite(box.lower[i]) ? 1 : 0;
    count += std::isfinite(box.upper[i]) ? 1 : 0;
  }
  return count;
}

}  // namespace

ControlBox ControlBox::symmetric(int dim, double limit) {
  return ControlBox{Eigen::VectorXd::Constant(dim, -limit), Eigen::VectorXd::Constant(dim, limit)};
}

ControlBox ControlBox::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return ControlBox{Eigen::VectorXd::Constant(dim, -inf), Eigen::VectorXd::Constant(dim, inf)};
}

void ControlBox::validate() const {
  if (lower.size() != upper.size()) throw ParameterError("control box bound sizes differ");
  for (int i = 0; i < dim(); ++i) {
    if (!(lower[i] <= upper[i])) throw ParameterError("control box lower bound exceeds upper bound");
  }
}

Eigen::VectorXd ControlBox::clamp(const Eigen::VectorXd& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

bool ControlBox::contains(const Eigen::VectorXd& u, double tol) const {
  return ((u - lower).array() >= -tol).all() && ((upper - u).array() >= -tol).all();
}

QpResult tvcbf_qp(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows, const ControlBox& box,
                  const std::vector<int>& warm_rows) {
  const auto start = std::chrono::steady_clock::now();
  const int m = static_cast<int>(u_ref.size());
  if (box.dim() != m) throw ParameterError("tvcbf_qp: box dimension mismatch");
  const int nrows = static_cast<int>(rows.size());
  DenseQp qp;
  qp.hessian = Eigen::MatrixXd::Identity(m, m);
  qp.linear = -u_ref;
  const int total = nrows + finite_bounds(box);
  qp.constraints = Eigen::MatrixXd::Zero(m, total);
  qp.lower = Eigen::VectorXd::Zero(total);
  for (int i = 0; i < nrows; ++i) {
    if (rows[i].a.size() != m || !rows[i].a.allFinite() || !std::isfinite(rows[i].c)) {
      throw ParameterError("tvcbf_qp: row is not finite or has the wrong size");
    }
    qp.constraints.col(i) = rows[i].a;
    qp.lower[i] = rows[i].c;
  }
  append_box(box, 0, qp.constraints, qp.lower, nrows);

  const DenseQpSolution sol = solve_dense_qp(qp, warm_rows);
  QpResult out;
  out.u = sol.x;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.row_duals = sol.duals.head(nrows);
  for (int idx : sol.active) {
    if (idx < nrows) out.active_rows.push_back(idx);
  }
  out.solve_time = seconds_since(start);
  return out;
}

Eigen::VectorXd infeasible_fallback(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows,
                                    const ControlBox& box) {
  const int m = static_cast<int>(u_ref.size());
  const int nrows = static_cast<int>(rows.size());
  constexpr double kReg = 1e-6;
  // Variables (u, t): maximize t with a_i^T u - t >= c_i.
  DenseQp qp;
  qp.hessian = kReg * Eigen::MatrixXd::Identity(m + 1, m + 1);
  qp.linear = Eigen::VectorXd::Zero(m + 1);
  qp.linear.head(m) = -kReg * u_ref;
  qp.linear[m] = -1.0;
  const int total = nrows + finite_bounds(box);
  qp.constraints = Eigen::MatrixXd::Zero(m + 1, total);
  qp.lower = Eigen::VectorXd::Zero(total);
  for (int i = 0; i < nrows; ++i) {
    qp.constraints.col(i).head(m) = rows[i].a;
    qp.constraints(m, i) = -1.0;
    qp.lower[i] = rows[i].c;
  }
  append_box(box, 0, qp.constraints, qp.lower, nrows);
  const DenseQpSolution sol = solve_dense_qp(qp);
  return box.clamp(sol.x.head(m));
}

FilterResult SafetyFilter::filter(const Eigen::VectorXd& u_ref, const std::vector<ConstraintRow>& rows) {
  const auto start = std::chrono::steady_clock::now();
  FilterResult out;
  std::vector<ConstraintRow> used;
  for (const auto& row : rows) {
    if (row.emergency) out.emergency = true;
    if (row.alpha_star - cfg_.beta > cfg_.prune_threshold) continue;
    used.push_back(row);
  }
  out.rows_used = static_cast<int>(used.size());
  if (out.emergency) {
    out.u = box_.clamp(Eigen::VectorXd::Zero(u_ref.size()));
    out.status = QpStatus::kInfeasible;
    out.solve_time = seconds_since(start);
    return out;
  }
  std::vector<int> warm;
  for (int i = 0; i < out.rows_used; ++i) {
    if (warm_.count({used[i].robot_index, used[i].obstacle_index})) warm.push_back(i);
  }
  const QpResult qp = tvcbf_qp(u_ref, used, box_, warm);
  out.status = qp.status;
  warm_.clear();
  if (qp.status == QpStatus::kOptimal) {
    out.u = qp.u;
    for (int idx : qp.active_rows) warm_.insert({used[idx].robot_index, used[idx].obstacle_index});
  } else {
    out.u = infeasible_fallback(u_ref, used, box_);
    out.fallback = true;
  }
  out.solve_time = seconds_since(start);
  return out;
}

Eigen::VectorXd proportional_reference(const Eigen::VectorXd& position, const Eigen::VectorXd& target, double kp) {
  return kp * (target - position);
}

Eigen::VectorXd pd_reference(const Eigen::VectorXd& q, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& dq,
                             const Eigen::VectorXd& kp, const Eigen::VectorXd& kd) {
  if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any()) throw ParameterError("PD gains must be nonnegative");
  return kp.cwiseProduct(q_bar - q) - kd.cwiseProduct(dq);
}

int MpcConfig::steps() const { return static_cast<int>(std::lround(horizon / sample_time)); }

void MpcConfig::validate() const {
  if (!(horizon > 0.0) || !(sample_time > 0.0)) throw ParameterError("MPC horizon and sample time must be positive");
  if (std::abs(horizon / sample_time - steps()) > 1e-9) throw ParameterError("MPC horizon must be a multiple of the sample time");
  if (w_target < 0.0 || w_effort < 0.0 || w_avoid < 0.0) throw ParameterError("MPC weights must be nonnegative");
  if (!(robot_radius > 0.0) || !(obstacle_radius > 0.0)) throw ParameterError("MPC radii must be positive");
}

MpcResult mpc_baseline(const Eigen::VectorXd& position, const Eigen::VectorXd& target,
                       const std::vector<Eigen::VectorXd>& obstacle_prediction, const MpcConfig& cfg,
                       const ControlBox& box, const std::vector<Eigen::VectorXd>& nominal) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const int nx = static_cast<int>(position.size());
  const int steps = cfg.steps();
  const int nu = nx * steps;
  if (box.dim() != nx) throw ParameterError("mpc_baseline: box dimension mismatch");
  if (static_cast<int>(obstacle_prediction.size()) < steps) {
    throw ParameterError("mpc_baseline: obstacle prediction shorter than the horizon");
  }

  // x_k = x_0 + dt * sum_{j<k} u_j for k = 1..N.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nu, nu);
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j <= k; ++j) s.block(k * nx, j * nx, nx, nx).diagonal().setConstant(cfg.sample_time);
  }
  const Eigen::VectorXd offset = (position - target).replicate(steps, 1);

  struct Halfspace {
    int step;
    Eigen::VectorXd normal;
    double bound;
  };
  std::vector<Halfspace> spaces;
  const double clearance = cfg.robot_radius + cfg.obstacle_radius;
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd& guess = nominal.size() == static_cast<std::size_t>(steps) ? nominal[k] : position;
    const Eigen::VectorXd& o = obstacle_prediction[k];
    Eigen::VectorXd diff = guess - o;
    if (diff.norm() - clearance >= cfg.d_risk) continue;
    if (diff.norm() < 1e-9) diff = position - o;
    if (diff.norm() < 1e-9) continue;
    const Eigen::VectorXd n = diff.normalized();
    // n^T (x_k - o_k) + eps >= clearance + d_obs
    spaces.push_back({k, n, clearance + cfg.d_obs - n.dot(position - o)});
  }

  const int ns = static_cast<int>(spaces.size());
  const int nv = nu + ns;
  DenseQp qp;
  qp.hessian = Eigen::MatrixXd::Zero(nv, nv);
  qp.hessian.topLeftCorner(nu, nu) =
      2.0 * (cfg.w_target * s.transpose() * s + cfg.w_effort * Eigen::MatrixXd::Identity(nu, nu));
  qp.hessian.bottomRightCorner(ns, ns) = 2.0 * std::max(cfg.w_avoid, 1e-9) * Eigen::MatrixXd::Identity(ns, ns);
  qp.hessian.diagonal().array() += 1e-12;
  qp.linear = Eigen::VectorXd::Zero(nv);
  qp.linear.head(nu) = 2.0 * cfg.w_target * s.transpose() * offset;

  const int nbox = finite_bounds(box) * steps;
  const int total = 2 * ns + nbox;
  qp.constraints = Eigen::MatrixXd::Zero(nv, total);
  qp.lower = Eigen::VectorXd::Zero(total);
  int col = 0;
  for (int i = 0; i < ns; ++i) {
    const auto& hs = spaces[i];
    qp.constraints.col(col).head(nu) = s.middleRows(hs.step * nx, nx).transpose() * hs.normal;
    qp.constraints(nu + i, col) = 1.0;
    qp.lower[col++] = hs.bound;
    qp.constraints(nu + i, col) = 1.0;
    qp.lower[col++] = 0.0;
  }
  for (int k = 0; k < steps; ++k) col = append_box(box, k * nx, qp.constraints, qp.lower, col);

  const DenseQpSolution sol = solve_dense_qp(qp);
  MpcResult out;
  out.status = sol.status;
  out.avoidance_rows = ns;
  const Eigen::VectorXd uplan = sol.x.head(nu);
  out.u = box.clamp(uplan.head(nx));
  const Eigen::VectorXd xs = s * uplan;
  for (int k = 0; k < steps; ++k) out.plan.push_back(position + xs.segment(k * nx, nx));
  out.solve_time = seconds_since(start);
  return out;
}

MpcResult MpcController::step(const Eigen::VectorXd& position, const Eigen::VectorXd& target,
                              const std::vector<Eigen::VectorXd>& obstacle_prediction) {
  std::vector<Eigen::VectorXd> nominal;
  if (!previous_.empty()) {
    nominal.assign(previous_.begin() + 1, previous_.end());
    nominal.push_back(previous_.back());
  }
  MpcResult out = mpc_baseline(position, target, obstacle_prediction, cfg_, box_, nominal);
  previous_ = out.plan;
  return out;
}

}  // namespace tvcbf
