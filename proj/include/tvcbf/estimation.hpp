#pragma once

#include <stdexcept>
#include <string>

#include "tvcbf/geometry.hpp"

namespace tvcbf {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Obstacle kinematic belief. The covariance is over the error state
/// [position, velocity, orientation tangent, angular velocity]; the
/// orientation error is a world-frame rotation vector, q = exp(d) * q_mean.
struct GaussianBelief {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();
  Mat12 covariance = Mat12::Zero();

  Mat3 position_covariance() const { return covariance.topLeftCorner<3, 3>(); }
};

struct PoseMeasurement {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  /// Covariance of [position, orientation tangent] noise.
  Mat6 noise = Mat6::Identity();
};

/// White-noise acceleration model parameters.
struct ProcessNoise {
  double accel_density = 1.0;          // m^2/s^3
  double angular_accel_density = 0.1;  // rad^2/s^3
  /// Holds angular velocity at zero (slowly rotating obstacles).
  bool freeze_rotation = false;
};

/// Discrete process covariance of the constant-velocity model over `dt`.
Mat12 process_noise_covariance(double dt, const ProcessNoise& noise);

GaussianBelief ekf_predict(const GaussianBelief& belief, double dt, const Mat12& process_noise);
GaussianBelief ekf_predict(const GaussianBelief& belief, double dt, const ProcessNoise& noise);

/// Throws NumericalError if the innovation covariance is singular.
GaussianBelief ekf_update(const GaussianBelief& belief, const PoseMeasurement& z);

struct BeliefInit {
  double velocity_variance = 100.0;          // (m/s)^2
  double angular_velocity_variance = 1.0;    // (rad/s)^2
};

/// Seeds pose from the first measurement; velocities start at zero.
GaussianBelief initialize_belief(const PoseMeasurement& z, const BeliefInit& init = {});

/// sqrt((y - mean)^T cov^-1 (y - mean)); throws NumericalError on a singular covariance.
double mahalanobis(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

struct PredictedConfiguration {
  Pose pose;
  Mat3 position_covariance = Mat3::Zero();
  Quat orientation_mean = Quat::Identity();
  Vec3 velocity = Vec3::Zero();
};

PredictedConfiguration predicted_configuration(const GaussianBelief& belief, double horizon,
                                               const ProcessNoise& noise = {});

/// Checks symmetry (1e-10) and eigenvalues >= -1e-12.
bool covariance_is_valid(const Eigen::MatrixXd& cov);

/// One filter per tracked obstacle.
class ObstacleTracker {
 public:
  ObstacleTracker() = default;
  explicit ObstacleTracker(ProcessNoise noise, BeliefInit init = {}) : noise_(noise), init_(init) {}

  /// Predicts to time `t` (if initialized) and fuses the measurement.
  void observe(const PoseMeasurement& z, double t);

  bool initialized() const { return initialized_; }
  const GaussianBelief& belief() const { return belief_; }
  double time() const { return time_; }
  const ProcessNoise& noise() const { return noise_; }

 private:
  ProcessNoise noise_;
  BeliefInit init_;
  GaussianBelief belief_;
  bool initialized_ = false;
  double time_ = 0.0;
};

}  // namespace tvcbf
