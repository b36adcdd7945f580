#include "tvcbf/scaling.hpp"

#include <algorithm>
#include <cmath>

namespace tvcbf {

const char* to_string(ScalingStatus status) {
  switch (status) {
    case ScalingStatus::kOptimal: return "optimal";
    case ScalingStatus::kInfeasible: return "infeasible";
    case ScalingStatus::kMaxIter: return "max_iter";
    case ScalingStatus::kDegenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

constexpr int kAlpha = 3;

struct BodyRows {
  int linear_offset = 0;
  int linear_count = 0;
  int soc_offset = -1;
  int aux = -1;  // capsule axial coordinate
};

struct Assembly {
  ConeProgram prog;
  BodyRows rows[2];
};

bool is_point_core(const ConvexPrimitive& prim) {
  return prim.kind() == PrimitiveKind::kSphere ||
         (prim.kind() == PrimitiveKind::kCapsule && prim.as_capsule().half_length == 0.0);
}

double core_radius(const ConvexPrimitive& prim) {
  return prim.kind() == PrimitiveKind::kSphere ? prim.as_sphere().radius : prim.as_capsule().radius;
}

int linear_count(const ConvexPrimitive& prim) {
  if (prim.kind() == PrimitiveKind::kPolytope) return static_cast<int>(prim.as_polytope().normals.rows());
  if (prim.kind() == PrimitiveKind::kCapsule && prim.as_capsule().half_length > 0.0) return 2;
  return 0;
}

Assembly assemble(const ConvexPrimitive* prims[2], const Pose* poses[2]) {
  Assembly as;
  int nvar = 4;
  int lin = 0;
  for (int k = 0; k < 2; ++k) {
    if (prims[k]->kind() == PrimitiveKind::kCapsule && prims[k]->as_capsule().half_length > 0.0) {
      as.rows[k].aux = nvar++;
    }
    as.rows[k].linear_offset = lin;
    as.rows[k].linear_count = linear_count(*prims[k]);
    lin += as.rows[k].linear_count;
  }
  int soc_rows = 0;
  for (int k = 0; k < 2; ++k) {
    if (prims[k]->kind() != PrimitiveKind::kPolytope) {
      as.rows[k].soc_offset = lin + soc_rows;
      as.prog.soc_dims.push_back(4);
      soc_rows += 4;
    }
  }
  const int m = lin + soc_rows;
  ConeProgram& prog = as.prog;
  prog.linear_rows = lin;
  prog.c = Eigen::VectorXd::Zero(nvar);
  prog.c(kAlpha) = 1.0;
  prog.G = Eigen::MatrixXd::Zero(m, nvar);
  prog.h = Eigen::VectorXd::Zero(m);

  for (int k = 0; k < 2; ++k) {
    const ConvexPrimitive& prim = *prims[k];
    const Pose& pose = *poses[k];
    const Mat3 rot = pose.rotation();
    const BodyRows& br = as.rows[k];
    switch (prim.kind()) {
      case PrimitiveKind::kPolytope: {
        // A R^T (p - r) <= alpha b
        const auto& poly = prim.as_polytope();
        const Eigen::MatrixXd art = poly.normals * rot.transpose();
        prog.G.block(br.linear_offset, 0, br.linear_count, 3) = art;
        prog.G.block(br.linear_offset, kAlpha, br.linear_count, 1) = -poly.offsets;
        prog.h.segment(br.linear_offset, br.linear_count) = art * pose.position;
        break;
      }
      case PrimitiveKind::kSphere:
      case PrimitiveKind::kCapsule: {
        // || p - r - sigma R z || <= alpha radius
        const int o = br.soc_offset;
        prog.G(o, kAlpha) = -core_radius(prim);
        prog.G.block(o + 1, 0, 3, 3) = -Mat3::Identity();
        prog.h.segment(o + 1, 3) = -pose.position;
        if (br.aux >= 0) {
          prog.G.block(o + 1, br.aux, 3, 1) = rot.col(2);
          // |sigma| <= alpha L/2
          const double half = prim.as_capsule().half_length;
          const int lo = br.linear_offset;
          prog.G(lo, br.aux) = 1.0;
          prog.G(lo, kAlpha) = -half;
          prog.G(lo + 1, br.aux) = -1.0;
          prog.G(lo + 1, kAlpha) = -half;
        }
        break;
      }
    }
  }
  return as;
}

// Smallest alpha that puts p inside the scaled body.
double required_alpha(const ConvexPrimitive& prim, const Pose& pose, const Vec3& p) {
  const Vec3 local = pose.orientation.conjugate() * (p - pose.position);
  switch (prim.kind()) {
    case PrimitiveKind::kSphere: return local.norm() / prim.as_sphere().radius;
    case PrimitiveKind::kCapsule: return local.norm() / prim.as_capsule().radius;
    case PrimitiveKind::kPolytope: {
      const auto& poly = prim.as_polytope();
      return (poly.normals * local).cwiseQuotient(poly.offsets).maxCoeff();
    }
  }
  return 1.0;
}

ScalingSolution sphere_pair(double ra, const Pose& pa, double rb, const Pose& pb, bool a_first_soc) {
  ScalingSolution sol;
  const Vec3 delta = pb.position - pa.position;
  const double d = delta.norm();
  const Vec3 u = delta / d;
  const double sum = ra + rb;
  sol.alpha_star = d / sum;
  sol.p_star = pa.position + u * (ra * sol.alpha_star);
  sol.primal = Eigen::VectorXd::Zero(4);
  sol.primal.head<3>() = sol.p_star;
  sol.primal(kAlpha) = sol.alpha_star;
  const double z0 = 1.0 / sum;
  sol.dual = Eigen::VectorXd::Zero(8);
  const int ia = a_first_soc ? 0 : 4;
  const int ib = a_first_soc ? 4 : 0;
  sol.dual(ia) = z0;
  sol.dual.segment<3>(ia + 1) = -z0 * u;
  sol.dual(ib) = z0;
  sol.dual.segment<3>(ib + 1) = z0 * u;
  sol.status = ScalingStatus::kOptimal;
  return sol;
}

}  // namespace

ScalingSolution min_scaling(const ConvexPrimitive& prim_a, const Pose& pose_a, const ConvexPrimitive& prim_b,
                            const Pose& pose_b, const ScalingOptions& options) {
  if (!pose_a.valid() || !pose_b.valid()) throw ParameterError("pose orientation must be a unit quaternion");
  ScalingSolution sol;
  if ((pose_a.position - pose_b.position).norm() < kDegenerateOriginDistance) {
    sol.status = ScalingStatus::kDegenerate;
    sol.p_star = pose_a.position;
    return sol;
  }
  if (options.sphere_shortcut && is_point_core(prim_a) && is_point_core(prim_b)) {
    return sphere_pair(core_radius(prim_a), pose_a, core_radius(prim_b), pose_b, true);
  }

  const ConvexPrimitive* prims[2] = {&prim_a, &prim_b};
  const Pose* poses[2] = {&pose_a, &pose_b};
  const Assembly as = assemble(prims, poses);

  // Strictly feasible start: midpoint of the origins with a generous alpha.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(as.prog.c.size());
  const Vec3 mid = 0.5 * (pose_a.position + pose_b.position);
  x0.head<3>() = mid;
  const double need = std::max(required_alpha(prim_a, pose_a, mid), required_alpha(prim_b, pose_b, mid));
  x0(kAlpha) = 1.5 * std::max(need, 1e-6) + 1e-3;

  const ConeSolution cs = solve_cone_program(as.prog, x0, options.solver);
  sol.primal = cs.x;
  sol.dual = cs.z;
  sol.alpha_star = cs.x(kAlpha);
  sol.p_star = cs.x.head<3>();
  sol.iterations = cs.iterations;
  switch (cs.status) {
    case ConeStatus::kOptimal: sol.status = ScalingStatus::kOptimal; break;
    case ConeStatus::kMaxIter:
    case ConeStatus::kNumerical: sol.status = ScalingStatus::kMaxIter; break;
  }
  return sol;
}

namespace {

PairGradient analytic_gradient(const ConvexPrimitive& prim_a, const Pose& pose_a, const ConvexPrimitive& prim_b,
                               const Pose& pose_b, const ScalingSolution& sol) {
  // d alpha*/d theta = -z^T d s(theta; x*)/d theta with s = h - G x.
  const ConvexPrimitive* prims[2] = {&prim_a, &prim_b};
  const Pose* poses[2] = {&pose_a, &pose_b};
  const bool shortcut = sol.primal.size() == 4 && sol.dual.size() == 8 && is_point_core(prim_a) &&
                        is_point_core(prim_b);
  Assembly as;
  if (!shortcut) as = assemble(prims, poses);
  PoseGradient out[2];
  const Vec3 p = sol.primal.head<3>();
  for (int k = 0; k < 2; ++k) {
    const ConvexPrimitive& prim = *prims[k];
    const Pose& pose = *poses[k];
    if (shortcut) {
      out[k].position = sol.dual.segment<3>(4 * k + 1);
      continue;
    }
    const BodyRows& br = as.rows[k];
    switch (prim.kind()) {
      case PrimitiveKind::kPolytope: {
        const Mat3 rot = pose.rotation();
        const Eigen::VectorXd zl = sol.dual.segment(br.linear_offset, br.linear_count);
        const Vec3 rat = rot * (prim.as_polytope().normals.transpose() * zl);
        out[k].position = -rat;
        out[k].orientation = -(p - pose.position).cross(rat);
        break;
      }
      case PrimitiveKind::kSphere:
      case PrimitiveKind::kCapsule: {
        const Vec3 zv = sol.dual.segment<3>(br.soc_offset + 1);
        out[k].position = zv;
        if (br.aux >= 0) {
          const double sigma = sol.primal(br.aux);
          out[k].orientation = sigma * pose.rotation().col(2).cross(zv);
        }
        break;
      }
    }
  }
  return {out[0], out[1]};
}

double solve_alpha(const ConvexPrimitive& a, const Pose& pa, const ConvexPrimitive& b, const Pose& pb) {
  ScalingOptions opts;
  opts.solver.gap_tol = 1e-13;
  opts.solver.feasibility_tol = 1e-12;
  opts.solver.fallback_tol = 1e-11;
  const ScalingSolution s = min_scaling(a, pa, b, pb, opts);
  if (s.status != ScalingStatus::kOptimal) throw GradientUndefined("scaling solve failed inside finite difference");
  return s.alpha_star;
}

PairGradient finite_difference_gradient(const ConvexPrimitive& prim_a, const Pose& pose_a,
                                        const ConvexPrimitive& prim_b, const Pose& pose_b) {
  PairGradient g;
  for (int body = 0; body < 2; ++body) {
    PoseGradient& out = body == 0 ? g.a : g.b;
    for (int i = 0; i < 3; ++i) {
      Pose plus_a = pose_a, minus_a = pose_a, plus_b = pose_b, minus_b = pose_b;
      Pose& plus = body == 0 ? plus_a : plus_b;
      Pose& minus = body == 0 ? minus_a : minus_b;
      plus.position(i) += kPositionStep;
      minus.position(i) -= kPositionStep;
      out.position(i) = (solve_alpha(prim_a, plus_a, prim_b, plus_b) - solve_alpha(prim_a, minus_a, prim_b, minus_b)) /
                        (2.0 * kPositionStep);

      plus_a = pose_a, minus_a = pose_a, plus_b = pose_b, minus_b = pose_b;
      const Vec3 delta = Vec3::Unit(i) * kOrientationStep;
      plus.orientation = retract(plus.orientation, delta);
      minus.orientation = retract(minus.orientation, -delta);
      out.orientation(i) =
          (solve_alpha(prim_a, plus_a, prim_b, plus_b) - solve_alpha(prim_a, minus_a, prim_b, minus_b)) /
          (2.0 * kOrientationStep);
    }
  }
  return g;
}

}  // namespace

PairGradient min_scaling_gradient(const ConvexPrimitive& prim_a, const Pose& pose_a,
                                  const ConvexPrimitive& prim_b, const Pose& pose_b,
                                  const ScalingSolution& solution, GradientMethod method) {
  if (solution.status == ScalingStatus::kDegenerate) throw GradientUndefined("degenerate scaling solution");
  if (solution.status != ScalingStatus::kOptimal) throw GradientUndefined("scaling solution is not optimal");
  if (method == GradientMethod::kAnalytic) return analytic_gradient(prim_a, pose_a, prim_b, pose_b, solution);
  return finite_difference_gradient(prim_a, pose_a, prim_b, pose_b);
}

}  // namespace tvcbf
