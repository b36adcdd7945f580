#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tvcbf/control.hpp"
#include "tvcbf/estimation.hpp"

namespace tvcbf {

/// Constant twist held for `duration` seconds.
struct MotionSegment {
  double duration = 0.0;
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

/// Scripted obstacle; stationary once the script runs out.
struct ObstacleSpec {
  std::string name;
  ConvexPrimitive primitive = ConvexPrimitive::sphere(1.0);
  Pose initial;
  std::vector<MotionSegment> script;

  Pose pose_at(double t) const;
  Vec3 velocity_at(double t) const;
  Vec3 angular_velocity_at(double t) const;
};

enum class Dynamics { kPlanarIntegrator, kPlanarMultisegment };

struct RobotSpec {
  Dynamics dynamics = Dynamics::kPlanarIntegrator;
  /// One primitive per segment. Capsule axes follow the links of a chain.
  std::vector<ConvexPrimitive> segments;
  /// Link lengths of a revolute chain about the world z axis, base at origin.
  std::vector<double> link_lengths;
  Eigen::VectorXd initial_state;

  int state_dim() const { return static_cast<int>(initial_state.size()); }
  /// Segment poses and 6 x n pose Jacobians at state x.
  void kinematics(const Eigen::VectorXd& x, std::vector<Pose>& poses, std::vector<Eigen::MatrixXd>* jacobians) const;
  /// Point used for path metrics: integrator position or chain tip.
  Vec3 tracking_point(const Eigen::VectorXd& x) const;
};

enum class ControllerKind { kTvcbf, kMpc, kReference };
enum class ReferenceKind { kConstant, kProportional };

const char* to_string(ControllerKind kind);

struct ControllerSpec {
  ControllerKind kind = ControllerKind::kTvcbf;
  ReferenceKind reference = ReferenceKind::kProportional;
  /// Constant reference command.
  Eigen::VectorXd constant_command;
  double kp = 2.0;
  CbfConfig cbf;
  MpcConfig mpc;
  ControlBox box;
};

struct NoiseSpec {
  bool enabled = false;
  /// Per-axis variance of the additive position noise.
  double position_variance = 0.5;
  /// Only the x and y axes are perturbed.
  bool planar = true;
  std::uint64_t seed = 0;
  ProcessNoise process;
};

struct Scenario {
  std::string name;
  std::string description;
  RobotSpec robot;
  std::vector<ObstacleSpec> obstacles;
  ControllerSpec controller;
  NoiseSpec noise;
  double dt = 0.01;
  double duration = 5.0;
  /// Goal in state space.
  Eigen::VectorXd target;

  /// Throws ParameterError; checks alpha* > beta for every pair at t = 0.
  void validate() const;
  int ticks() const;
};

struct TraceRecord {
  double t = 0.0;
  Eigen::VectorXd state;
  Eigen::VectorXd u;
  Eigen::VectorXd u_ref;
  /// Per pair, row-major over (segment, obstacle).
  std::vector<double> h;
  std::vector<double> alpha;
  std::vector<double> distance;
  QpStatus status = QpStatus::kOptimal;
  bool fallback = false;
  bool emergency = false;
  /// Thread CPU seconds spent observing and solving this tick.
  double solve_time = 0.0;
};

struct Trace {
  std::string scenario;
  ControllerKind controller = ControllerKind::kTvcbf;
  int segments = 0;
  int obstacles = 0;
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
  std::vector<TraceRecord> records;
};

/// Stateful runner; one call to step() per control tick.
class Simulation {
 public:
  explicit Simulation(Scenario scenario);
  ~Simulation();
  Simulation(Simulation&&) noexcept;

  bool done() const { return tick_ >= scenario_.ticks(); }
  double time() const { return tick_ * scenario_.dt; }
  const Eigen::VectorXd& state() const { return state_; }
  /// Obstacle filters; only fed when measurement noise is enabled.
  const std::vector<ObstacleTracker>& trackers() const { return trackers_; }
  /// Advances one tick and returns the record taken before integration.
  TraceRecord step();

 private:
  struct ObstacleView {
    Pose pose;
    Vec3 velocity;
    Pose next;
    Mat3 covariance;
  };
  ObstacleView observe(int j, double t);

  Scenario scenario_;
  Eigen::VectorXd state_;
  Vec3 robot_velocity_prev_;
  std::vector<Vec3> segment_velocity_;
  int tick_ = 0;
  std::mt19937_64 rng_;
  std::vector<ObstacleTracker> trackers_;
  std::unique_ptr<SafetyFilter> filter_;
  std::unique_ptr<MpcController> mpc_;
};

Trace run(const Scenario& scenario);

struct Metrics {
  double min_h = 0.0;
  double min_alpha = 0.0;
  double min_distance = 0.0;
  double max_lateral_deviation = 0.0;
  bool target_reached = false;
  double mean_solve_time = 0.0;
  double max_solve_time = 0.0;
  int fallback_ticks = 0;
  int emergency_ticks = 0;
};

/// Throws std::invalid_argument on an empty trace.
Metrics metrics(const Trace& trace);

/// Times at which any pair has h below `level`.
std::vector<double> ticks_below(const Trace& trace, double level);

std::vector<Scenario> builtin_scenarios();
std::optional<Scenario> find_scenario(const std::vector<Scenario>& registry, const std::string& name);

/// Header line, column line, then one line per record; 9 significant digits.
void write_trace_csv(const Trace& trace, std::ostream& out);
void write_metrics(const Metrics& m, std::ostream& out);

std::string scenario_to_json(const Scenario& scenario);
/// Throws ParameterError on malformed input.
Scenario scenario_from_json(const std::string& text);

}  // namespace tvcbf
