#include "tvcbf/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tvcbf {

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "Optimal";
    case QpStatus::kInfeasible: return "Infeasible";
    case QpStatus::kMaxIter: return "MaxIter";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Factors kept by the dual method: J^T N = [R; 0] for the active normals N.
struct Factors {
  Eigen::MatrixXd j;
  Eigen::MatrixXd r;
  int q = 0;
};

void rotate_columns(Eigen::MatrixXd& m, int a, int b, double c, double s) {
  const Eigen::VectorXd ca = m.col(a);
  m.col(a) = c * ca + s * m.col(b);
  m.col(b) = -s * ca + c * m.col(b);
}

bool add_constraint(Factors& f, Eigen::VectorXd d) {
  const int n = static_cast<int>(d.size());
  for (int k = n - 1; k > f.q; --k) {
    const double h = std::hypot(d[k - 1], d[k]);
    if (h == 0.0) continue;
    const double c = d[k - 1] / h;
    const double s = d[k] / h;
    d[k - 1] = h;
    d[k] = 0.0;
    rotate_columns(f.j, k - 1, k, c, s);
  }
  if (std::abs(d[f.q]) <= 1e-14 * std::max(1.0, d.head(f.q + 1).norm())) return false;
  f.r.col(f.q).head(f.q + 1) = d.head(f.q + 1);
  ++f.q;
  return true;
}

void delete_constraint(Factors& f, int l) {
  for (int c = l; c < f.q - 1; ++c) f.r.col(c) = f.r.col(c + 1);
  f.r.col(f.q - 1).setZero();
  --f.q;
  for (int k = l; k < f.q; ++k) {
    const double a = f.r(k, k);
    const double b = f.r(k + 1, k);
    const double h = std::hypot(a, b);
    if (h == 0.0) continue;
    const double c = a / h;
    const double s = b / h;
    for (int col = k; col < f.q; ++col) {
      const double top = f.r(k, col);
      const double bot = f.r(k + 1, col);
      f.r(k, col) = c * top + s * bot;
      f.r(k + 1, col) = -s * top + c * bot;
    }
    f.r(k + 1, k) = 0.0;
    rotate_columns(f.j, k, k + 1, c, s);
  }
}

}  // namespace

DenseQpSolution solve_dense_qp(const DenseQp& qp, const std::vector<int>& preferred,
                               const DenseQpSettings& settings) {
  const int n = static_cast<int>(qp.linear.size());
  const int m = static_cast<int>(qp.lower.size());
  if (qp.hessian.rows() != n || qp.hessian.cols() != n || qp.constraints.rows() != n ||
      qp.constraints.cols() != m) {
    throw std::invalid_argument("solve_dense_qp: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(qp.hessian);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("solve_dense_qp: Hessian not positive definite");

  Factors f;
  f.j = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  f.r = Eigen::MatrixXd::Zero(n, n);

  DenseQpSolution out;
  out.x = -llt.solve(qp.linear);
  out.duals = Eigen::VectorXd::Zero(m);
  std::vector<int> active;
  std::vector<double> u;
  std::vector<char> is_active(m, 0);
  std::vector<char> is_preferred(m, 0);
  for (int p : preferred) {
    if (p >= 0 && p < m) is_preferred[p] = 1;
  }

  auto finish = [&](QpStatus status) {
    out.status = status;
    out.active = active;
    for (std::size_t i = 0; i < active.size(); ++i) out.duals[active[i]] = u[i];
    return out;
  };

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    out.iterations = iter + 1;
    // Pick the constraint to add: most violated, preferred rows first.
    int p = -1;
    double worst = -settings.violation_tol;
    bool found_preferred = false;
    for (int i = 0; i < m; ++i) {
      if (is_active[i]) continue;
      const double scale = std::max(1.0, qp.constraints.col(i).norm());
      const double s = (qp.constraints.col(i).dot(out.x) - qp.lower[i]) / scale;
      if (s >= -settings.violation_tol) continue;
      const bool pref = is_preferred[i] != 0;
      if ((pref && !found_preferred) || (pref == found_preferred && s < worst)) {
        worst = s;
        p = i;
        found_preferred = pref;
      }
    }
    if (p < 0) return finish(QpStatus::kOptimal);

    const Eigen::VectorXd np = qp.constraints.col(p);
    double up = 0.0;
    for (;;) {
      if (++out.iterations > settings.max_iterations) return finish(QpStatus::kMaxIter);
      const double sp = np.dot(out.x) - qp.lower[p];
      const Eigen::VectorXd d = f.j.transpose() * np;
      const Eigen::VectorXd z = f.j.rightCols(n - f.q) * d.tail(n - f.q);
      Eigen::VectorXd r = Eigen::VectorXd::Zero(f.q);
      if (f.q > 0) {
        r = f.r.topLeftCorner(f.q, f.q).triangularView<Eigen::Upper>().solve(d.head(f.q));
      }
      // Partial step: largest move keeping active multipliers nonnegative.
      double t1 = kInf;
      int l = -1;
      for (int k = 0; k < f.q; ++k) {
        if (r[k] > 1e-14 && u[k] / r[k] < t1) {
          t1 = u[k] / r[k];
          l = k;
        }
      }
      // Full step: makes constraint p tight.
      double t2 = kInf;
      const double znp = z.dot(np);
      if (z.norm() > 1e-14 * std::max(1.0, np.norm()) && znp > 0.0) t2 = -sp / znp;

      if (t1 == kInf && t2 == kInf) return finish(QpStatus::kInfeasible);
      if (t2 == kInf) {
        for (int k = 0; k < f.q; ++k) u[k] -= t1 * r[k];
        up += t1;
        is_active[active[l]] = 0;
        active.erase(active.begin() + l);
        u.erase(u.begin() + l);
        delete_constraint(f, l);
        continue;
      }
      const double t = std::min(t1, t2);
      out.x += t * z;
      for (int k = 0; k < f.q; ++k) u[k] -= t * r[k];
      up += t;
      if (t2 <= t1) {
        if (!add_constraint(f, d)) return finish(QpStatus::kInfeasible);
        active.push_back(p);
        u.push_back(up);
        is_active[p] = 1;
        break;
      }
      is_active[active[l]] = 0;
      active.erase(active.begin() + l);
      u.erase(u.begin() + l);
      delete_constraint(f, l);
    }
  }
  return finish(QpStatus::kMaxIter);
}

}  // namespace tvcbf
