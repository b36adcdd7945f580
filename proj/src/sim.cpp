#include "tvcbf/sim.hpp"

#include <time.h>

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "tvcbf/distance.hpp"

namespace tvcbf {

Pose ObstacleSpec::pose_at(double t) const {
  Pose p = initial;
  double start = 0.0;
  for (const auto& seg : script) {
    const double span = std::clamp(t - start, 0.0, seg.duration);
    if (span <= 0.0) break;
    p.position += seg.velocity * span;
    if (!seg.angular_velocity.isZero(0.0)) p.orientation = canonical(quat_exp(seg.angular_velocity * span) * p.orientation);
    start += seg.duration;
  }
  return p;
}

namespace {

// CPU time of this thread, so preemption on a shared core does not count as solver cost.
double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

const MotionSegment* segment_at(const std::vector<MotionSegment>& script, double t) {
  double start = 0.0;
  for (const auto& seg : script) {
    if (t >= start && t < start + seg.duration) return &seg;
    start += seg.duration;
  }
  return nullptr;
}

}  // namespace

Vec3 ObstacleSpec::velocity_at(double t) const {
  const auto* seg = segment_at(script, t);
  return seg ? seg->velocity : Vec3::Zero();
}

Vec3 ObstacleSpec::angular_velocity_at(double t) const {
  const auto* seg = segment_at(script, t);
  return seg ? seg->angular_velocity : Vec3::Zero();
}

void RobotSpec::kinematics(const Eigen::VectorXd& x, std::vector<Pose>& poses,
                           std::vector<Eigen::MatrixXd>* jacobians) const {
  const int n = static_cast<int>(x.size());
  const int ns = static_cast<int>(segments.size());
  poses.assign(ns, Pose());
  if (jacobians) jacobians->assign(ns, Eigen::MatrixXd::Zero(6, n));
  if (dynamics == Dynamics::kPlanarIntegrator) {
    for (int i = 0; i < ns; ++i) {
      poses[i] = Pose(Vec3(x[0], x[1], 0.0));
      if (jacobians) {
        (*jacobians)[i](0, 0) = 1.0;
        (*jacobians)[i](1, 1) = 1.0;
      }
    }
    return;
  }
  // Revolute chain about world z; capsule axes lie along the links.
  const Quat to_link = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()));
  std::vector<Vec3> joints(1, Vec3::Zero());
  double angle = 0.0;
  for (int i = 0; i < ns; ++i) {
    angle += x[i];
    const Vec3 dir(std::cos(angle), std::sin(angle), 0.0);
    const Vec3 center = joints[i] + 0.5 * link_lengths[i] * dir;
    joints.push_back(joints[i] + link_lengths[i] * dir);
    poses[i] = Pose(center, canonical(rot_z(angle) * to_link));
    if (jacobians) {
      for (int j = 0; j <= i; ++j) {
        (*jacobians)[i].block<3, 1>(0, j) = Vec3::UnitZ().cross(center - joints[j]);
        (*jacobians)[i](5, j) = 1.0;
      }
    }
  }
}

Vec3 RobotSpec::tracking_point(const Eigen::VectorXd& x) const {
  if (dynamics == Dynamics::kPlanarIntegrator) return Vec3(x[0], x[1], 0.0);
  Vec3 tip = Vec3::Zero();
  double angle = 0.0;
  for (std::size_t i = 0; i < link_lengths.size(); ++i) {
    angle += x[i];
    tip += link_lengths[i] * Vec3(std::cos(angle), std::sin(angle), 0.0);
  }
  return tip;
}

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kTvcbf: return "tvcbfqp";
    case ControllerKind::kMpc: return "mpc";
    case ControllerKind::kReference: return "reference";
  }
  return "?";
}

int Scenario::ticks() const { return static_cast<int>(std::floor(duration / dt + 1e-9)); }

void Scenario::validate() const {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  if (!(duration >= 0.0)) throw ParameterError("duration must be nonnegative");
  if (robot.segments.empty()) throw ParameterError("robot has no segments");
  const int n = robot.state_dim();
  if (robot.dynamics == Dynamics::kPlanarIntegrator && n != 2) {
    throw ParameterError("planar integrator state must have 2 entries");
  }
  if (robot.dynamics == Dynamics::kPlanarMultisegment &&
      (robot.link_lengths.size() != robot.segments.size() || n != static_cast<int>(robot.segments.size()))) {
    throw ParameterError("chain needs one link length and one joint per segment");
  }
  if (target.size() != n) throw ParameterError("target dimension does not match the state");
  controller.box.validate();
  if (controller.box.dim() != n) throw ParameterError("control box dimension does not match the state");
  if (controller.reference == ReferenceKind::kConstant && controller.constant_command.size() != n) {
    throw ParameterError("constant command dimension does not match the state");
  }
  controller.cbf.validate();
  if (controller.kind == ControllerKind::kMpc) {
    controller.mpc.validate();
    if (robot.dynamics != Dynamics::kPlanarIntegrator || robot.segments.size() != 1 || obstacles.size() != 1) {
      throw ParameterError("the MPC baseline supports one planar body and one obstacle");
    }
  }
  if (noise.enabled && !(noise.position_variance > 0.0)) throw ParameterError("noise variance must be positive");
  for (const auto& ob : obstacles) {
    for (const auto& seg : ob.script) {
      if (!(seg.duration >= 0.0)) throw ParameterError("motion segment duration must be nonnegative");
    }
  }
  std::vector<Pose> poses;
  robot.kinematics(robot.initial_state, poses, nullptr);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (const auto& ob : obstacles) {
      const auto sol = min_scaling(robot.segments[i], poses[i], ob.primitive, ob.initial);
      if (sol.status != ScalingStatus::kOptimal || !(sol.alpha_star > controller.cbf.beta)) {
        throw ParameterError("initial state is not safe for obstacle '" + ob.name + "'");
      }
    }
  }
}

Simulation::Simulation(Scenario scenario) : scenario_(std::move(scenario)), rng_(scenario_.noise.seed) {
  scenario_.validate();
  state_ = scenario_.robot.initial_state;
  segment_velocity_.assign(scenario_.robot.segments.size(), Vec3::Zero());
  robot_velocity_prev_ = Vec3::Zero();
  if (scenario_.noise.enabled) {
    trackers_.assign(scenario_.obstacles.size(), ObstacleTracker(scenario_.noise.process));
  }
  const auto& c = scenario_.controller;
  if (c.kind == ControllerKind::kTvcbf) {
    CbfConfig cfg = c.cbf;
    cfg.dt = scenario_.dt;
    filter_ = std::make_unique<SafetyFilter>(cfg, c.box);
  } else if (c.kind == ControllerKind::kMpc) {
    MpcConfig mpc = c.mpc;
    mpc_ = std::make_unique<MpcController>(mpc, c.box);
  }
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;

Simulation::ObstacleView Simulation::observe(int j, double t) {
  const auto& ob = scenario_.obstacles[j];
  const Pose truth = ob.pose_at(t);
  const double dt = scenario_.dt;
  ObstacleView v;
  if (!scenario_.noise.enabled) {
    v.pose = truth;
    v.velocity = ob.velocity_at(t);
    v.next = Pose(truth.position + dt * v.velocity,
                  canonical(quat_exp(ob.angular_velocity_at(t) * dt) * truth.orientation));
    v.covariance = Mat3::Zero();
    return v;
  }
  std::normal_distribution<double> gauss(0.0, std::sqrt(scenario_.noise.position_variance));
  PoseMeasurement z;
  z.position = truth.position;
  const int axes = scenario_.noise.planar ? 2 : 3;
  for (int a = 0; a < axes; ++a) z.position[a] += gauss(rng_);
  z.orientation = truth.orientation;
  z.noise = Mat6::Identity() * 1e-6;
  for (int a = 0; a < axes; ++a) z.noise(a, a) = scenario_.noise.position_variance;
  trackers_[j].observe(z, t);
  const auto& belief = trackers_[j].belief();
  const auto next = predicted_configuration(belief, dt, scenario_.noise.process);
  v.pose = Pose(belief.position, belief.orientation);
  v.velocity = belief.velocity;
  v.next = next.pose;
  v.covariance = belief.position_covariance();
  return v;
}

TraceRecord Simulation::step() {
  const double t = time();
  const auto& robot = scenario_.robot;
  const auto& ctrl = scenario_.controller;
  const int n = robot.state_dim();
  const int ns = static_cast<int>(robot.segments.size());
  const int no = static_cast<int>(scenario_.obstacles.size());

  TraceRecord rec;
  rec.t = t;
  rec.state = state_;

  std::vector<Pose> poses;
  std::vector<Eigen::MatrixXd> jac;
  robot.kinematics(state_, poses, &jac);

  const double start = thread_cpu_seconds();
  std::vector<ObstacleView> views;
  for (int j = 0; j < no; ++j) views.push_back(observe(j, t));

  rec.u_ref = ctrl.reference == ReferenceKind::kConstant ? ctrl.constant_command
                                                         : proportional_reference(state_, scenario_.target, ctrl.kp);
  Eigen::VectorXd u;
  std::vector<double> controller_h(ns * no, std::numeric_limits<double>::quiet_NaN());
  if (ctrl.kind == ControllerKind::kTvcbf) {
    std::vector<ConstraintRow> rows;
    const Eigen::VectorXd drift = Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd input = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < no; ++j) {
        BodyPairState pair;
        pair.robot_index = i;
        pair.obstacle_index = j;
        pair.robot = &robot.segments[i];
        pair.obstacle = &scenario_.obstacles[j].primitive;
        pair.robot_pose = poses[i];
        pair.robot_velocity = segment_velocity_[i];
        pair.pose_jacobian = jac[i];
        pair.obstacle_pose = views[j].pose;
        pair.obstacle_velocity = views[j].velocity;
        pair.obstacle_pose_next = views[j].next;
        pair.obstacle_covariance = views[j].covariance;
        rows.push_back(constraint_row(pair, filter_->config(), drift, input));
        controller_h[i * no + j] = rows.back().h;
      }
    }
    const FilterResult res = filter_->filter(rec.u_ref, rows);
    u = res.u;
    rec.status = res.status;
    rec.fallback = res.fallback;
    rec.emergency = res.emergency;
  } else if (ctrl.kind == ControllerKind::kMpc) {
    const auto& cfg = mpc_->config();
    std::vector<Eigen::VectorXd> prediction;
    for (int k = 1; k <= cfg.steps(); ++k) {
      const Vec3 p = views[0].pose.position + views[0].velocity * (k * cfg.sample_time);
      prediction.push_back(p.head<2>());
    }
    const MpcResult res = mpc_->step(state_, scenario_.target, prediction);
    u = res.u;
    rec.status = res.status;
  } else {
    u = ctrl.box.clamp(rec.u_ref);
  }
  u = ctrl.box.clamp(u);
  rec.solve_time = thread_cpu_seconds() - start;
  rec.u = u;

  // Ground truth for the record: alpha* and the independent distance oracle.
  rec.h.resize(ns * no);
  rec.alpha.resize(ns * no);
  rec.distance.resize(ns * no);
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < no; ++j) {
      const auto& ob = scenario_.obstacles[j];
      const Pose truth = ob.pose_at(t);
      const auto sol = min_scaling(robot.segments[i], poses[i], ob.primitive, truth);
      const double alpha = sol.status == ScalingStatus::kOptimal ? sol.alpha_star : 0.0;
      const int idx = i * no + j;
      rec.alpha[idx] = alpha;
      rec.h[idx] = std::isnan(controller_h[idx]) ? alpha - ctrl.cbf.beta : controller_h[idx];
      rec.distance[idx] = gjk_distance(robot.segments[i], poses[i], ob.primitive, truth).distance;
    }
  }

  state_ += u * scenario_.dt;
  for (int i = 0; i < ns; ++i) segment_velocity_[i] = jac[i].topRows<3>() * u;
  ++tick_;
  return rec;
}

Trace run(const Scenario& scenario) {
  Simulation sim(scenario);
  Trace trace;
  trace.scenario = scenario.name;
  trace.controller = scenario.controller.kind;
  trace.segments = static_cast<int>(scenario.robot.segments.size());
  trace.obstacles = static_cast<int>(scenario.obstacles.size());
  trace.start = scenario.robot.tracking_point(scenario.robot.initial_state);
  trace.goal = scenario.robot.tracking_point(scenario.target);
  trace.records.reserve(scenario.ticks());
  while (!sim.done()) trace.records.push_back(sim.step());
  return trace;
}

Metrics metrics(const Trace& trace) {
  if (trace.records.empty()) throw std::invalid_argument("metrics of an empty trace");
  const double inf = std::numeric_limits<double>::infinity();
  Metrics m;
  m.min_h = m.min_alpha = m.min_distance = inf;
  const Vec3 axis = trace.goal - trace.start;
  const Vec3 dir = axis.norm() > 0.0 ? Vec3(axis.normalized()) : Vec3::UnitX();
  double total_time = 0.0;
  double closest = inf;
  for (const auto& r : trace.records) {
    for (double h : r.h) m.min_h = std::min(m.min_h, h);
    for (double a : r.alpha) m.min_alpha = std::min(m.min_alpha, a);
    for (double d : r.distance) m.min_distance = std::min(m.min_distance, d);
    // Integrator state is the tracked point; chains report no path metrics.
    if (r.state.size() == 2) {
      const Vec3 p(r.state[0], r.state[1], 0.0);
      const Vec3 rel = p - trace.start;
      m.max_lateral_deviation = std::max(m.max_lateral_deviation, (rel - rel.dot(dir) * dir).norm());
      closest = std::min(closest, (p - trace.goal).norm());
    }
    total_time += r.solve_time;
    m.max_solve_time = std::max(m.max_solve_time, r.solve_time);
    m.fallback_ticks += r.fallback ? 1 : 0;
    m.emergency_ticks += r.emergency ? 1 : 0;
  }
  m.target_reached = closest <= 0.1;
  m.mean_solve_time = total_time / static_cast<double>(trace.records.size());
  return m;
}

std::vector<double> ticks_below(const Trace& trace, double level) {
  std::vector<double> out;
  for (const auto& r : trace.records) {
    for (double h : r.h) {
      if (h < level) {
        out.push_back(r.t);
        break;
      }
    }
  }
  return out;
}

std::optional<Scenario> find_scenario(const std::vector<Scenario>& registry, const std::string& name) {
  for (const auto& s : registry) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  const int n = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().state.size());
  out << std::setprecision(9);
  out << "# scenario=" << trace.scenario << " controller=" << to_string(trace.controller)
      << " segments=" << trace.segments << " obstacles=" << trace.obstacles << " records=" << trace.records.size()
      << "\n";
  out << "t";
  for (int k = 0; k < n; ++k) out << ",x" << k;
  for (int k = 0; k < n; ++k) out << ",u" << k;
  for (int k = 0; k < n; ++k) out << ",uref" << k;
  out << ",status,fallback,emergency,solve_time";
  for (int i = 0; i < trace.segments; ++i) {
    for (int j = 0; j < trace.obstacles; ++j) out << ",h_" << i << "_" << j;
  }
  for (int i = 0; i < trace.segments; ++i) {
    for (int j = 0; j < trace.obstacles; ++j) out << ",alpha_" << i << "_" << j;
  }
  for (int i = 0; i < trace.segments; ++i) {
    for (int j = 0; j < trace.obstacles; ++j) out << ",dist_" << i << "_" << j;
  }
  out << "\n";
  for (const auto& r : trace.records) {
    out << r.t;
    for (int k = 0; k < n; ++k) out << "," << r.state[k];
    for (int k = 0; k < n; ++k) out << "," << r.u[k];
    for (int k = 0; k < n; ++k) out << "," << r.u_ref[k];
    out << "," << to_string(r.status) << "," << int(r.fallback) << "," << int(r.emergency) << "," << r.solve_time;
    for (double v : r.h) out << "," << v;
    for (double v : r.alpha) out << "," << v;
    for (double v : r.distance) out << "," << v;
    out << "\n";
  }
}

void write_metrics(const Metrics& m, std::ostream& out) {
  out << std::setprecision(9);
  out << "min_h = " << m.min_h << "\n"
      << "min_alpha = " << m.min_alpha << "\n"
      << "min_distance = " << m.min_distance << "\n"
      << "max_lateral_deviation = " << m.max_lateral_deviation << "\n"
      << "target_reached = " << (m.target_reached ? "true" : "false") << "\n"
      << "mean_solve_time = " << m.mean_solve_time << "\n"
      << "max_solve_time = " << m.max_solve_time << "\n"
      << "fallback_ticks = " << m.fallback_ticks << "\n"
      << "emergency_ticks = " << m.emergency_ticks << "\n";
}

}  // namespace tvcbf
