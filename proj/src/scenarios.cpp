#include <cmath>
#include <limits>

#include "tvcbf/sim.hpp"

namespace tvcbf {
namespace {

constexpr double kForever = 1e6;

Scenario moving_circles() {
  Scenario s;
  s.name = "moving_circles";
  s.description = "circle robot, circle obstacle approaching head-on at 4 m/s, constant reference (2, 0)";
  s.robot.dynamics = Dynamics::kPlanarIntegrator;
  s.robot.segments = {ConvexPrimitive::sphere(0.5)};
  s.robot.initial_state = Eigen::Vector2d(-5.0, -0.5);
  ObstacleSpec ob;
  ob.name = "circle";
  ob.primitive = ConvexPrimitive::sphere(1.5);
  ob.initial = Pose(Vec3(5.0, 0.0, 0.0));
  ob.script = {{kForever, Vec3(-4.0, 0.0, 0.0), Vec3::Zero()}};
  s.obstacles = {ob};
  s.controller.kind = ControllerKind::kTvcbf;
  s.controller.reference = ReferenceKind::kConstant;
  s.controller.constant_command = Eigen::Vector2d(2.0, 0.0);
  s.controller.box = ControlBox::unbounded(2);
  s.controller.mpc.robot_radius = 0.5;
  s.controller.mpc.obstacle_radius = 1.5;
  s.dt = 0.01;
  s.duration = 10.0;
  s.target = Eigen::Vector2d(20.0, -0.5);
  return s;
}

Scenario moving_circles_noisy() {
  Scenario s = moving_circles();
  s.name = "moving_circles_noisy";
  s.description = "moving circles with N(0, 0.5) position noise per planar axis, EKF, worst-case k = 3";
  s.noise.enabled = true;
  s.noise.position_variance = 0.5;
  s.noise.seed = 1;
  s.controller.cbf.noise_robust = true;
  s.controller.cbf.k = 3.0;
  return s;
}

Scenario moving_circles_actuation() {
  Scenario s = moving_circles();
  s.name = "moving_circles_actuation";
  s.description = "moving circles with velocity box [-1, 1] m/s and actuation inflation b = 1";
  s.controller.box = ControlBox::symmetric(2, 1.0);
  s.controller.cbf.actuation_inflated = true;
  s.controller.cbf.b = 1.0;
  return s;
}

Scenario moving_rectangle() {
  Scenario s;
  s.name = "moving_rectangle";
  s.description = "circle robot to (20, -0.5) past a 3 x 0.4 x 2 m box moving at 4 m/s, velocity box [-1, 1]";
  s.robot.dynamics = Dynamics::kPlanarIntegrator;
  s.robot.segments = {ConvexPrimitive::sphere(0.5)};
  s.robot.initial_state = Eigen::Vector2d(-5.0, -0.5);
  ObstacleSpec ob;
  ob.name = "rectangle";
  ob.primitive = ConvexPrimitive::box(Vec3(3.0, 0.4, 2.0));
  ob.initial = Pose(Vec3(5.0, 0.0, 0.0));
  ob.script = {{kForever, Vec3(-4.0, 0.0, 0.0), Vec3::Zero()}};
  s.obstacles = {ob};
  s.controller.kind = ControllerKind::kTvcbf;
  s.controller.reference = ReferenceKind::kProportional;
  s.controller.kp = 2.0;
  s.controller.box = ControlBox::symmetric(2, 1.0);
  s.controller.cbf.actuation_inflated = true;
  s.controller.cbf.b = 1e-3;
  s.controller.mpc.robot_radius = 0.5;
  s.controller.mpc.obstacle_radius = ob.primitive.bounding_radius();
  s.dt = 0.01;
  s.duration = 30.0;
  s.target = Eigen::Vector2d(20.0, -0.5);
  return s;
}

Scenario moving_rectangle_mpc() {
  Scenario s = moving_rectangle();
  s.name = "moving_rectangle_mpc";
  s.description = "moving rectangle task under the sphere-model half-space MPC baseline";
  s.controller.kind = ControllerKind::kMpc;
  s.controller.mpc.horizon = 1.5;
  s.controller.mpc.sample_time = 0.05;
  s.controller.mpc.d_risk = 1.5;
  s.controller.mpc.d_obs = 1.5;
  s.controller.mpc.w_target = 0.1;
  s.controller.mpc.w_effort = 0.1;
  s.controller.mpc.w_avoid = 10.0;
  return s;
}

Scenario planar_arm_box() {
  Scenario s;
  s.name = "planar_arm_box";
  s.description = "3-link planar arm of capsules holding a pose while a box approaches, stops and retracts";
  s.robot.dynamics = Dynamics::kPlanarMultisegment;
  s.robot.link_lengths = {0.4, 0.3, 0.2};
  for (double l : s.robot.link_lengths) s.robot.segments.push_back(ConvexPrimitive::capsule(0.5 * l, 0.05));
  s.robot.initial_state = Eigen::Vector3d(0.3, 0.4, 0.3);
  ObstacleSpec box;
  box.name = "box";
  box.primitive = ConvexPrimitive::box(Vec3(0.3, 0.2, 0.3));
  box.initial = Pose(Vec3(0.6, 1.1, 0.0), rot_z(0.2));
  box.script = {{2.0, Vec3(0.0, -0.3, 0.0), Vec3(0.0, 0.0, -0.1)},
                {1.0, Vec3::Zero(), Vec3::Zero()},
                {2.0, Vec3(0.0, 0.3, 0.0), Vec3::Zero()}};
  ObstacleSpec ball;
  ball.name = "ball";
  ball.primitive = ConvexPrimitive::sphere(0.08);
  ball.initial = Pose(Vec3(1.2, 0.25, 0.0));
  ball.script = {{2.5, Vec3(-0.18, 0.0, 0.0), Vec3::Zero()}, {2.5, Vec3(0.18, 0.0, 0.0), Vec3::Zero()}};
  s.obstacles = {box, ball};
  s.controller.kind = ControllerKind::kTvcbf;
  s.controller.reference = ReferenceKind::kProportional;
  s.controller.kp = 2.0;
  s.controller.box = ControlBox::symmetric(3, 2.0);
  s.dt = 0.01;
  s.duration = 5.0;
  s.target = s.robot.initial_state;
  return s;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  return {moving_circles(),   moving_circles_noisy(), moving_circles_actuation(),
          moving_rectangle(), moving_rectangle_mpc(), planar_arm_box()};
}

}  // namespace tvcbf
