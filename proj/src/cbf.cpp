#include "tvcbf/cbf.hpp"

#include <cmath>
#include <numbers>

#include "tvcbf/estimation.hpp"

namespace tvcbf {

void CbfConfig::validate() const {
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  if (!(beta >= 1.0)) throw ParameterError("beta must be at least 1");
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  if (!(k >= 0.0)) throw ParameterError("k must be nonnegative");
  if (!(b >= 0.0)) throw ParameterError("b must be nonnegative");
}

namespace {

void check_pair(const BodyPairState& pair) {
  if (pair.robot == nullptr || pair.obstacle == nullptr) throw ParameterError("pair has no primitives");
}

double alpha_at(const BodyPairState& pair, const Pose& obstacle, bool* ok) {
  const auto sol = min_scaling(*pair.robot, pair.robot_pose, *pair.obstacle, obstacle);
  *ok = sol.status == ScalingStatus::kOptimal;
  return sol.alpha_star;
}

}  // namespace

double relative_approach(const Vec3& robot_position, const Vec3& robot_velocity, const Vec3& obstacle_position,
                         const Vec3& obstacle_velocity) {
  return (obstacle_velocity - robot_velocity).dot(robot_position - obstacle_position);
}

WorstCase worst_case_position(const Vec3& mean, const Mat3& covariance, double k, const Vec3& gradient) {
  WorstCase out;
  out.position = mean;
  if (k == 0.0 || covariance.isZero(0.0)) return out;
  const double norm = gradient.norm();
  if (!(norm > 1e-12)) {
    out.fallback = true;
    return out;
  }
  const Vec3 hr = gradient / norm;
  Eigen::LLT<Mat3> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("obstacle covariance is not positive definite");
  const double q = hr.dot(llt.solve(hr));
  out.position = mean + k * hr / std::sqrt(q);
  return out;
}

WorstCase worst_case_position(const BodyPairState& pair, const CbfConfig& cfg) {
  check_pair(pair);
  const auto sol = min_scaling(*pair.robot, pair.robot_pose, *pair.obstacle, pair.obstacle_pose);
  if (sol.status != ScalingStatus::kOptimal) {
    return WorstCase{pair.obstacle_pose.position, true};
  }
  const auto grad = min_scaling_gradient(*pair.robot, pair.robot_pose, *pair.obstacle, pair.obstacle_pose, sol,
                                         cfg.gradient);
  const Vec3 g = cfg.flip_worst_case ? Vec3(-grad.a.position) : grad.a.position;
  return worst_case_position(pair.obstacle_pose.position, pair.obstacle_covariance, cfg.k, g);
}

CbfEvaluation evaluate_cbf(const BodyPairState& pair, const CbfConfig& cfg) {
  check_pair(pair);
  CbfEvaluation ev;
  Pose obstacle = pair.obstacle_pose;
  Pose obstacle_next = pair.obstacle_pose_next;
  if (cfg.noise_robust && cfg.k > 0.0) {
    const WorstCase wc = worst_case_position(pair, cfg);
    const Vec3 shift = wc.position - obstacle.position;
    obstacle.position += shift;
    obstacle_next.position += shift;
    ev.worst_case_fallback = wc.fallback;
  }
  ev.effective_obstacle = obstacle;

  const auto sol = min_scaling(*pair.robot, pair.robot_pose, *pair.obstacle, obstacle);
  if (sol.status != ScalingStatus::kOptimal) {
    ev.degenerate = true;
    ev.alpha_star = sol.alpha_star;
    ev.h = ev.h_rhs = kUnsafeSentinel;
    return ev;
  }
  const double alpha = sol.alpha_star;
  ev.alpha_star = alpha;
  const auto grad = min_scaling_gradient(*pair.robot, pair.robot_pose, *pair.obstacle, obstacle, sol, cfg.gradient);
  Vec6 dalpha;
  dalpha << grad.a.position, grad.a.orientation;

  double alpha_next = alpha;
  if (cfg.time_varying) {
    bool ok = false;
    alpha_next = alpha_at(pair, obstacle_next, &ok);
    if (!ok) {
      ev.degenerate = true;
      ev.h = ev.h_rhs = kUnsafeSentinel;
      return ev;
    }
  }

  const double plain = alpha - cfg.beta;
  const double plain_dt = (alpha_next - alpha) / cfg.dt;
  ev.h = ev.h_rhs = plain;
  ev.dh_dt = plain_dt;
  ev.dh_dpose = dalpha;
  if (!cfg.actuation_inflated) return ev;

  const Vec3& pr = pair.robot_pose.position;
  const double av = relative_approach(pr, pair.robot_velocity, obstacle.position, pair.obstacle_velocity);
  const double av_next =
      relative_approach(pr, pair.robot_velocity, obstacle_next.position, pair.obstacle_velocity);
  ev.a_v = av;
  const double gain = 1.0 + cfg.b;
  const double inflated = gain * av * alpha - cfg.beta;
  if (cfg.plain_floor && inflated < plain) return ev;
  ev.h_rhs = inflated;
  if (cfg.rhs_only) return ev;

  // a_v is a time-varying weight; its drift enters through the time partial only
  ev.h = inflated;
  ev.dh_dt = cfg.time_varying ? gain * (av_next * alpha_next - av * alpha) / cfg.dt : 0.0;
  ev.dh_dpose = gain * av * dalpha;
  return ev;
}

double cbf_value(const BodyPairState& pair, const CbfConfig& cfg) {
  CbfConfig plain = cfg;
  plain.actuation_inflated = false;
  plain.time_varying = false;
  return evaluate_cbf(pair, plain).h;
}

double inflated_cbf_value(const BodyPairState& pair, const CbfConfig& cfg) {
  CbfConfig c = cfg;
  c.actuation_inflated = true;
  c.rhs_only = true;
  c.plain_floor = false;
  c.time_varying = false;
  return evaluate_cbf(pair, c).h_rhs;
}

double cbf_time_partial(const BodyPairState& pair, const CbfConfig& cfg) {
  if (!cfg.time_varying) return 0.0;
  return evaluate_cbf(pair, cfg).dh_dt;
}

BruteForceResult brute_force_worst_config(const BodyPairState& pair, double beta, double k,
                                          const Mat3& covariance, int grid_resolution, bool planar) {
  check_pair(pair);
  const Vec3 mean = pair.obstacle_pose.position;
  auto h_at = [&](const Vec3& p) {
    Pose pose = pair.obstacle_pose;
    pose.position = p;
    const auto sol = min_scaling(*pair.robot, pair.robot_pose, *pair.obstacle, pose);
    return sol.status == ScalingStatus::kOptimal ? sol.alpha_star - beta : kUnsafeSentinel;
  };
  BruteForceResult best{mean, h_at(mean)};
  if (k == 0.0) return best;

  Eigen::LLT<Mat3> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("obstacle covariance is not positive definite");
  const Mat3 l = llt.matrixL();
  Eigen::LLT<Eigen::Matrix2d> llt2(covariance.topLeftCorner<2, 2>());
  const Eigen::Matrix2d l2 = llt2.matrixL();

  auto consider = [&](const Vec3& p) {
    const double h = h_at(p);
    if (h < best.h) best = {p, h};
  };
  const int n = std::max(grid_resolution, 16);
  const double pi = std::numbers::pi;
  for (double shell : {0.25, 0.5, 0.75, 1.0}) {
    const double radius = shell * k;
    if (planar) {
      for (int i = 0; i < 4 * n; ++i) {
        const double t = 2.0 * pi * i / (4 * n);
        Vec3 p = mean;
        p.head<2>() += radius * l2 * Eigen::Vector2d(std::cos(t), std::sin(t));
        consider(p);
      }
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      const double polar = pi * i / n;
      const int ring = (i == 0 || i == n) ? 1 : 2 * n;
      for (int j = 0; j < ring; ++j) {
        const double az = 2.0 * pi * j / ring;
        const Vec3 u(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar));
        consider(mean + radius * l * u);
      }
    }
  }
  return best;
}

ConstraintRow constraint_row(const BodyPairState& pair, const CbfConfig& cfg, const Eigen::VectorXd& drift,
                             const Eigen::MatrixXd& input_matrix) {
  const long n = pair.pose_jacobian.cols();
  if (pair.pose_jacobian.rows() != 6 || drift.size() != n || input_matrix.rows() != n) {
    throw ParameterError("constraint_row: dimension mismatch");
  }
  const CbfEvaluation ev = evaluate_cbf(pair, cfg);
  ConstraintRow row;
  row.robot_index = pair.robot_index;
  row.obstacle_index = pair.obstacle_index;
  row.h = ev.h_rhs;
  row.dh_dt = ev.dh_dt;
  row.alpha_star = ev.alpha_star;
  row.worst_case_fallback = ev.worst_case_fallback;
  if (ev.degenerate) {
    row.emergency = true;
    row.a = Eigen::VectorXd::Zero(input_matrix.cols());
    row.c = 0.0;
    return row;
  }
  const Eigen::RowVectorXd dh_dx = ev.dh_dpose.transpose() * pair.pose_jacobian;
  row.a = (dh_dx * input_matrix).transpose();
  row.c = -cfg.gamma * ev.h_rhs - ev.dh_dt - dh_dx.dot(drift);
  return row;
}

}  // namespace tvcbf
