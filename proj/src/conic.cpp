#include "tvcbf/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tvcbf {

int ConeProgram::num_rows() const {
  return linear_rows + std::accumulate(soc_dims.begin(), soc_dims.end(), 0);
}

int ConeProgram::degree() const { return linear_rows + static_cast<int>(soc_dims.size()); }

namespace {

template <class Vec, class Mat>
void nt_scaling_block(const Vec& s, const Vec& z, Mat& w, Mat& w_inv) {
  const Eigen::Index d = s.size();
  auto jnorm = [](const Vec& v) {
    return std::sqrt(std::max(v(0) * v(0) - v.tail(v.size() - 1).squaredNorm(), 1e-300));
  };
  const double sn = jnorm(s);
  const double zn = jnorm(z);
  const Vec sb = s / sn;
  const Vec zb = z / zn;
  const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 0.0));
  Vec wb(d);
  wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
  wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
  Vec v = wb;
  v(0) += 1.0;
  v /= std::sqrt(2.0 * (wb(0) + 1.0));
  const double beta = std::sqrt(sn / zn);

  Mat j = Mat::Identity(d, d);
  j.bottomRightCorner(d - 1, d - 1) *= -1.0;
  const Vec jv = j * v;
  w = beta * (2.0 * v * v.transpose() - j);
  w_inv = (2.0 * jv * jv.transpose() - j) / beta;
}

template <class A, class B>
double soc_step(const A& x, const B& d) {
  const auto n = x.size() - 1;
  const double a = d(0) * d(0) - d.tail(n).squaredNorm();
  const double b = x(0) * d(0) - x.tail(n).dot(d.tail(n));
  const double c = std::max(x(0) * x(0) - x.tail(n).squaredNorm(), 0.0);
  const double disc = b * b - a * c;
  if (a < 0.0 || (b < 0.0 && disc >= 0.0)) {
    const double denom = -b + std::sqrt(std::max(disc, 0.0));
    if (denom <= 0.0) return 0.0;
    return c / denom;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

namespace cone_detail {

SocScaling soc_nt_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
  SocScaling out;
  nt_scaling_block(s, z, out.w, out.w_inv);
  return out;
}

double soc_max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d) { return soc_step(x, d); }

}  // namespace cone_detail

namespace {

// Capacity of the stack-allocated path; larger programs use heap storage.
constexpr int kSmall = 32;

template <int Cap>
class ConeAlgebra {
 public:
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, Cap, 1>;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, Cap, Cap>;

  explicit ConeAlgebra(const ConeProgram& prog) : l_(prog.linear_rows), dims_(prog.soc_dims) {
    m_ = prog.num_rows();
  }

  Vec identity() const {
    Vec e = Vec::Zero(m_);
    e.head(l_).setOnes();
    int off = l_;
    for (int d : dims_) {
      e(off) = 1.0;
      off += d;
    }
    return e;
  }

  Vec product(const Vec& u, const Vec& v) const {
    Vec out(m_);
    out.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
    int off = l_;
    for (int d : dims_) {
      out(off) = u.segment(off, d).dot(v.segment(off, d));
      out.segment(off + 1, d - 1) = u(off) * v.segment(off + 1, d - 1) + v(off) * u.segment(off + 1, d - 1);
      off += d;
    }
    return out;
  }

  // Solves lambda o u = r for u.
  Vec divide(const Vec& lambda, const Vec& r) const {
    Vec out(m_);
    out.head(l_) = r.head(l_).cwiseQuotient(lambda.head(l_));
    int off = l_;
    for (int d : dims_) {
      const double l0 = lambda(off);
      const auto l1 = lambda.segment(off + 1, d - 1);
      const double r0 = r(off);
      const auto r1 = r.segment(off + 1, d - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double u0 = (l0 * r0 - l1.dot(r1)) / det;
      out(off) = u0;
      out.segment(off + 1, d - 1) = (r1 - u0 * l1) / l0;
      off += d;
    }
    return out;
  }

  double max_step(const Vec& x, const Vec& dx) const {
    double t = std::numeric_limits<double>::infinity();
    for (int i = 0; i < l_; ++i) {
      if (dx(i) < 0.0) t = std::min(t, -x(i) / dx(i));
    }
    int off = l_;
    for (int d : dims_) {
      t = std::min(t, soc_step(x.segment(off, d), dx.segment(off, d)));
      off += d;
    }
    return t;
  }

  // inf{a : x + a e in K}
  double shift_to_boundary(const Vec& x) const {
    double a = -std::numeric_limits<double>::infinity();
    if (l_ > 0) a = std::max(a, -x.head(l_).minCoeff());
    int off = l_;
    for (int d : dims_) {
      a = std::max(a, x.segment(off + 1, d - 1).norm() - x(off));
      off += d;
    }
    return a;
  }

  void scaling(const Vec& s, const Vec& z, Mat& w, Mat& w_inv) const {
    w = Mat::Zero(m_, m_);
    w_inv = Mat::Zero(m_, m_);
    for (int i = 0; i < l_; ++i) {
      const double wi = std::sqrt(s(i) / z(i));
      w(i, i) = wi;
      w_inv(i, i) = 1.0 / wi;
    }
    int off = l_;
    for (int d : dims_) {
      Mat bw, bw_inv;
      nt_scaling_block(Vec(s.segment(off, d)), Vec(z.segment(off, d)), bw, bw_inv);
      w.block(off, off, d, d) = bw;
      w_inv.block(off, off, d, d) = bw_inv;
      off += d;
    }
  }

 private:
  int l_;
  std::vector<int> dims_;
  int m_;
};

template <class Vec>
struct Residuals {
  Vec rx;
  Vec rz;
  double gap;
  double pres;
  double dres;
};

template <int Cap>
ConeSolution solve_impl(const ConeProgram& prog, const std::optional<Eigen::VectorXd>& x0,
                        const ConeSolverSettings& settings) {
  using Vec = typename ConeAlgebra<Cap>::Vec;
  using Mat = typename ConeAlgebra<Cap>::Mat;
  const ConeAlgebra<Cap> cone(prog);
  const int m = prog.num_rows();
  const int nu = prog.degree();
  const Mat g = prog.G;
  const Vec c = prog.c;
  const Vec hv = prog.h;
  const Vec e = cone.identity();

  ConeSolution sol;
  Eigen::LDLT<Mat> gtg(Mat(g.transpose() * g));
  Vec x = x0 ? Vec(*x0) : Vec(gtg.solve(g.transpose() * hv));
  Vec s = hv - g * x;
  if (!x0) {
    const double a = cone.shift_to_boundary(s);
    if (a >= -1e-8) s += (1.0 + a) * e;
  }
  Vec z = -g * gtg.solve(c);
  {
    const double a = cone.shift_to_boundary(z);
    if (a >= -1e-8) z += (1.0 + a) * e;
  }

  const double hscale = std::max(1.0, prog.h.norm());
  const double cscale = std::max(1.0, prog.c.norm());
  auto residuals = [&](const Vec& xx, const Vec& ss, const Vec& zz) {
    Residuals<Vec> r;
    r.rx = g.transpose() * zz + c;
    r.rz = g * xx + ss - hv;
    r.gap = ss.dot(zz);
    r.pres = r.rz.norm() / hscale;
    r.dres = r.rx.norm() / cscale;
    return r;
  };

  auto record = [&](const Residuals<Vec>& r, int it) {
    sol.x = x;
    sol.s = s;
    sol.z = z;
    sol.gap = r.gap;
    sol.primal_residual = r.pres;
    sol.dual_residual = r.dres;
    sol.iterations = it;
  };

  Mat w, w_inv;
  int stall = 0;
  double last_gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= settings.max_iterations; ++it) {
    const Residuals<Vec> r = residuals(x, s, z);
    if (!std::isfinite(r.gap) || !x.allFinite()) {
      sol.status = ConeStatus::kNumerical;
      return sol;
    }
    record(r, it);
    const double objective_scale = std::max(1.0, std::abs(c.dot(x)));
    if (r.pres <= settings.feasibility_tol && r.dres <= settings.feasibility_tol &&
        r.gap <= settings.gap_tol * objective_scale) {
      sol.status = ConeStatus::kOptimal;
      return sol;
    }
    if (it == settings.max_iterations) break;

    const double mu = r.gap / nu;
    cone.scaling(s, z, w, w_inv);
    const Vec lambda = w * z;
    // Scaled KKT system in (dx, W dz):
    //   [ 0   Gs^T ] [dx ]   [ -rx                  ]
    //   [ Gs  -I   ] [dzs] = [ W^-1 (-rz - W q)     ],  Gs = W^-1 G
    const int n = static_cast<int>(prog.c.size());
    const Mat gs = w_inv * g;
    Mat kkt = Mat::Zero(n + m, n + m);
    kkt.topRightCorner(n, m) = gs.transpose();
    kkt.bottomLeftCorner(m, n) = gs;
    kkt.bottomRightCorner(m, m) = -Mat::Identity(m, m);
    const Eigen::PartialPivLU<Mat> lu(kkt);

    auto newton = [&](const Vec& rs, Vec& dx, Vec& ds, Vec& dz) {
      const Vec wq = w * cone.divide(lambda, rs);
      Vec rhs(n + m);
      rhs.head(n) = -r.rx;
      rhs.tail(m) = w_inv * (-r.rz - wq);
      Vec sol_kkt = lu.solve(rhs);
      for (int refine = 0; refine < 1; ++refine) sol_kkt += lu.solve(rhs - kkt * sol_kkt);
      dx = sol_kkt.head(n);
      dz = w_inv * sol_kkt.tail(m);
      ds = -r.rz - g * dx;
    };

    Vec dxa, dsa, dza;
    newton(-cone.product(lambda, lambda), dxa, dsa, dza);
    const double ta = std::min(1.0, std::min(cone.max_step(s, dsa), cone.max_step(z, dza)));
    const double mu_aff = (s + ta * dsa).dot(z + ta * dza) / nu;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    const Vec corr = cone.product(w_inv * dsa, w * dza);
    Vec dx, ds, dz;
    newton(-cone.product(lambda, lambda) - corr + sigma * mu * e, dx, ds, dz);
    const double tmax = std::min(cone.max_step(s, ds), cone.max_step(z, dz));
    const double t = std::min(1.0, 0.99 * tmax);
    if (!(t > 1e-14)) break;
    x += t * dx;
    s += t * ds;
    z += t * dz;

    if (r.gap >= 0.5 * last_gap) {
      if (++stall >= 8) break;
    } else {
      stall = 0;
    }
    last_gap = std::min(last_gap, r.gap);
  }

  const Residuals<Vec> r = residuals(sol.x, sol.s, sol.z);
  const double objective_scale = std::max(1.0, std::abs(prog.c.dot(sol.x)));
  if (r.pres <= settings.fallback_tol && r.dres <= settings.fallback_tol &&
      r.gap <= settings.fallback_tol * objective_scale) {
    sol.status = ConeStatus::kOptimal;
  } else {
    sol.status = sol.iterations >= settings.max_iterations ? ConeStatus::kMaxIter : ConeStatus::kNumerical;
  }
  return sol;
}

}  // namespace

ConeSolution solve_cone_program(const ConeProgram& prog, const std::optional<Eigen::VectorXd>& x0,
                                const ConeSolverSettings& settings) {
  if (prog.c.size() + prog.num_rows() <= kSmall) return solve_impl<kSmall>(prog, x0, settings);
  return solve_impl<Eigen::Dynamic>(prog, x0, settings);
}

}  // namespace tvcbf
