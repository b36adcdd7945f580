#include "tvcbf/estimation.hpp"

#include <cmath>

namespace tvcbf {
namespace {

constexpr int kP = 0;
constexpr int kV = 3;
constexpr int kTheta = 6;
constexpr int kOmega = 9;

Eigen::Matrix<double, 6, 12> measurement_jacobian() {
  Eigen::Matrix<double, 6, 12> h = Eigen::Matrix<double, 6, 12>::Zero();
  h.block<3, 3>(0, kP).setIdentity();
  h.block<3, 3>(3, kTheta).setIdentity();
  return h;
}

Mat12 symmetrized(const Mat12& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Mat12 process_noise_covariance(double dt, const ProcessNoise& noise) {
  Mat12 q = Mat12::Zero();
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  auto fill = [&](int pos, int vel, double density) {
    q.block<3, 3>(pos, pos) = Mat3::Identity() * density * dt3 / 3.0;
    q.block<3, 3>(pos, vel) = Mat3::Identity() * density * dt2 / 2.0;
    q.block<3, 3>(vel, pos) = Mat3::Identity() * density * dt2 / 2.0;
    q.block<3, 3>(vel, vel) = Mat3::Identity() * density * dt;
  };
  fill(kP, kV, noise.accel_density);
  if (!noise.freeze_rotation) {
    fill(kTheta, kOmega, noise.angular_accel_density);
  }
  return q;
}

GaussianBelief ekf_predict(const GaussianBelief& belief, double dt, const Mat12& process_noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("prediction step must be positive");
  GaussianBelief out = belief;
  out.position = belief.position + dt * belief.velocity;
  const Quat step = quat_exp(belief.angular_velocity * dt);
  out.orientation = canonical(step * belief.orientation);

  Mat12 f = Mat12::Identity();
  f.block<3, 3>(kP, kV) = dt * Mat3::Identity();
  f.block<3, 3>(kTheta, kTheta) = step.toRotationMatrix();
  f.block<3, 3>(kTheta, kOmega) = dt * Mat3::Identity();
  out.covariance = symmetrized(f * belief.covariance * f.transpose() + process_noise);
  return out;
}

GaussianBelief ekf_predict(const GaussianBelief& belief, double dt, const ProcessNoise& noise) {
  GaussianBelief out = ekf_predict(belief, dt, process_noise_covariance(dt, noise));
  if (noise.freeze_rotation) out.angular_velocity.setZero();
  return out;
}

GaussianBelief ekf_update(const GaussianBelief& belief, const PoseMeasurement& z) {
  const auto h = measurement_jacobian();
  Eigen::Matrix<double, 6, 1> innovation;
  innovation.head<3>() = z.position - belief.position;
  innovation.tail<3>() = quat_log(z.orientation * belief.orientation.conjugate());

  const Mat6 s = h * belief.covariance * h.transpose() + z.noise;
  Eigen::LDLT<Mat6> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-15 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
    throw NumericalError("innovation covariance is singular");
  }
  const Eigen::Matrix<double, 12, 6> k = ldlt.solve(h * belief.covariance).transpose();
  const Eigen::Matrix<double, 12, 1> dx = k * innovation;

  GaussianBelief out = belief;
  out.position += dx.segment<3>(kP);
  out.velocity += dx.segment<3>(kV);
  out.orientation = canonical(quat_exp(dx.segment<3>(kTheta)) * belief.orientation);
  out.angular_velocity += dx.segment<3>(kOmega);

  // Joseph form keeps the posterior symmetric positive semidefinite.
  const Mat12 ikh = Mat12::Identity() - k * h;
  out.covariance = symmetrized(ikh * belief.covariance * ikh.transpose() + k * z.noise * k.transpose());
  return out;
}

GaussianBelief initialize_belief(const PoseMeasurement& z, const BeliefInit& init) {
  GaussianBelief b;
  b.position = z.position;
  b.orientation = canonical(z.orientation);
  b.covariance.block<3, 3>(kP, kP) = z.noise.topLeftCorner<3, 3>();
  b.covariance.block<3, 3>(kTheta, kTheta) = z.noise.bottomRightCorner<3, 3>();
  b.covariance.block<3, 3>(kP, kTheta) = z.noise.topRightCorner<3, 3>();
  b.covariance.block<3, 3>(kTheta, kP) = z.noise.bottomLeftCorner<3, 3>();
  b.covariance.block<3, 3>(kV, kV) = Mat3::Identity() * init.velocity_variance;
  b.covariance.block<3, 3>(kOmega, kOmega) = Mat3::Identity() * init.angular_velocity_variance;
  return b;
}

double mahalanobis(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (y.size() != mean.size() || cov.rows() != y.size() || cov.cols() != y.size()) {
    throw std::invalid_argument("mahalanobis: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::VectorXd w = llt.matrixL().solve(y - mean);
  return w.norm();
}

PredictedConfiguration predicted_configuration(const GaussianBelief& belief, double horizon,
                                               const ProcessNoise& noise) {
  if (horizon < 0.0) throw std::invalid_argument("prediction horizon must be nonnegative");
  const GaussianBelief b = horizon > 0.0 ? ekf_predict(belief, horizon, noise) : belief;
  PredictedConfiguration out;
  out.pose = Pose(b.position, b.orientation);
  out.position_covariance = b.position_covariance();
  out.orientation_mean = b.orientation;
  out.velocity = b.velocity;
  return out;
}

bool covariance_is_valid(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || !cov.allFinite()) return false;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
}

void ObstacleTracker::observe(const PoseMeasurement& z, double t) {
  if (!initialized_) {
    belief_ = initialize_belief(z, init_);
    initialized_ = true;
    time_ = t;
    return;
  }
  if (t > time_) belief_ = ekf_predict(belief_, t - time_, noise_);
  time_ = t;
  belief_ = ekf_update(belief_, z);
}

}  // namespace tvcbf
