// JSON form of Scenario, mirroring the struct one field per key.

#include <cmath>
#include <limits>

#include <json.hpp>

#include "tvcbf/sim.hpp"

namespace tvcbf {
namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) {
    // JSON has no infinities.
    if (std::isfinite(v[i])) {
      out.push_back(v[i]);
    } else {
      out.push_back(v[i] > 0 ? "inf" : "-inf");
    }
  }
  return out;
}

Eigen::VectorXd to_vec(const json& j) {
  if (!j.is_array()) throw ParameterError("expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_string()) {
      const auto s = j[i].get<std::string>();
      if (s == "inf") {
        v[i] = std::numeric_limits<double>::infinity();
      } else if (s == "-inf") {
        v[i] = -std::numeric_limits<double>::infinity();
      } else {
        throw ParameterError("bad number '" + s + "'");
      }
    } else {
      v[i] = j[i].get<double>();
    }
  }
  return v;
}

Vec3 to_vec3(const json& j) {
  const Eigen::VectorXd v = to_vec(j);
  if (v.size() != 3) throw ParameterError("expected 3 numbers");
  return v;
}

json pose_json(const Pose& p) {
  const Quat& q = p.orientation;
  return {{"position", vec(p.position)}, {"orientation_wxyz", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from(const json& j) {
  Pose p(to_vec3(j.at("position")));
  if (j.contains("orientation_wxyz")) {
    const Eigen::VectorXd q = to_vec(j.at("orientation_wxyz"));
    if (q.size() != 4) throw ParameterError("orientation needs 4 numbers");
    p.orientation = Quat(q[0], q[1], q[2], q[3]);
  }
  if (!p.valid()) throw ParameterError("orientation is not a unit quaternion");
  return p;
}

json primitive_json(const ConvexPrimitive& prim) {
  switch (prim.kind()) {
    case PrimitiveKind::kSphere: return {{"type", "sphere"}, {"radius", prim.as_sphere().radius}};
    case PrimitiveKind::kCapsule:
      return {{"type", "capsule"}, {"half_length", prim.as_capsule().half_length}, {"radius", prim.as_capsule().radius}};
    case PrimitiveKind::kPolytope: {
      const auto& poly = prim.as_polytope();
      json normals = json::array();
      for (int i = 0; i < poly.normals.rows(); ++i) normals.push_back(vec(poly.normals.row(i).transpose()));
      return {{"type", "polytope"}, {"normals", normals}, {"offsets", vec(poly.offsets)}};
    }
  }
  return {};
}

ConvexPrimitive primitive_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "sphere") return ConvexPrimitive::sphere(j.at("radius").get<double>());
  if (type == "capsule") return ConvexPrimitive::capsule(j.at("half_length").get<double>(), j.at("radius").get<double>());
  if (type == "box") return ConvexPrimitive::box(to_vec3(j.at("size")));
  if (type == "polytope") {
    const auto& rows = j.at("normals");
    Eigen::Matrix<double, Eigen::Dynamic, 3> a(rows.size(), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) a.row(i) = to_vec3(rows[i]).transpose();
    return ConvexPrimitive::polytope(a, to_vec(j.at("offsets")));
  }
  throw ParameterError("unknown primitive type '" + type + "'");
}

const char* dynamics_name(Dynamics d) {
  return d == Dynamics::kPlanarIntegrator ? "planar-integrator" : "planar-multisegment";
}

Dynamics dynamics_from(const std::string& s) {
  if (s == "planar-integrator") return Dynamics::kPlanarIntegrator;
  if (s == "planar-multisegment") return Dynamics::kPlanarMultisegment;
  throw ParameterError("unknown dynamics '" + s + "'");
}

ControllerKind controller_from(const std::string& s) {
  if (s == "tvcbfqp") return ControllerKind::kTvcbf;
  if (s == "mpc") return ControllerKind::kMpc;
  if (s == "reference") return ControllerKind::kReference;
  throw ParameterError("unknown controller '" + s + "'");
}

json cbf_json(const CbfConfig& c) {
  return {{"gamma", c.gamma},
          {"beta", c.beta},
          {"dt", c.dt},
          {"k", c.k},
          {"b", c.b},
          {"noise_robust", c.noise_robust},
          {"actuation_inflated", c.actuation_inflated},
          {"time_varying", c.time_varying},
          {"rhs_only", c.rhs_only},
          {"plain_floor", c.plain_floor},
          {"flip_worst_case", c.flip_worst_case},
          {"prune_threshold", c.prune_threshold},
          {"gradient", c.gradient == GradientMethod::kAnalytic ? "analytic" : "finite-difference"}};
}

CbfConfig cbf_from(const json& j) {
  CbfConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.beta = j.value("beta", c.beta);
  c.dt = j.value("dt", c.dt);
  c.k = j.value("k", c.k);
  c.b = j.value("b", c.b);
  c.noise_robust = j.value("noise_robust", c.noise_robust);
  c.actuation_inflated = j.value("actuation_inflated", c.actuation_inflated);
  c.time_varying = j.value("time_varying", c.time_varying);
  c.rhs_only = j.value("rhs_only", c.rhs_only);
  c.plain_floor = j.value("plain_floor", c.plain_floor);
  c.flip_worst_case = j.value("flip_worst_case", c.flip_worst_case);
  c.prune_threshold = j.value("prune_threshold", c.prune_threshold);
  const auto grad = j.value("gradient", std::string("analytic"));
  if (grad == "analytic") {
    c.gradient = GradientMethod::kAnalytic;
  } else if (grad == "finite-difference") {
    c.gradient = GradientMethod::kFiniteDifference;
  } else {
    throw ParameterError("unknown gradient method '" + grad + "'");
  }
  return c;
}

json mpc_json(const MpcConfig& m) {
  return {{"horizon", m.horizon},   {"sample_time", m.sample_time}, {"d_risk", m.d_risk},
          {"d_obs", m.d_obs},       {"w_target", m.w_target},       {"w_effort", m.w_effort},
          {"w_avoid", m.w_avoid},   {"robot_radius", m.robot_radius}, {"obstacle_radius", m.obstacle_radius}};
}

MpcConfig mpc_from(const json& j) {
  MpcConfig m;
  m.horizon = j.value("horizon", m.horizon);
  m.sample_time = j.value("sample_time", m.sample_time);
  m.d_risk = j.value("d_risk", m.d_risk);
  m.d_obs = j.value("d_obs", m.d_obs);
  m.w_target = j.value("w_target", m.w_target);
  m.w_effort = j.value("w_effort", m.w_effort);
  m.w_avoid = j.value("w_avoid", m.w_avoid);
  m.robot_radius = j.value("robot_radius", m.robot_radius);
  m.obstacle_radius = j.value("obstacle_radius", m.obstacle_radius);
  return m;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json robot = {{"dynamics", dynamics_name(s.robot.dynamics)},
                {"segments", json::array()},
                {"link_lengths", s.robot.link_lengths},
                {"initial_state", vec(s.robot.initial_state)}};
  for (const auto& seg : s.robot.segments) robot["segments"].push_back(primitive_json(seg));

  json obstacles = json::array();
  for (const auto& ob : s.obstacles) {
    json script = json::array();
    for (const auto& m : ob.script) {
      script.push_back({{"duration", m.duration},
                        {"velocity", vec(m.velocity)},
                        {"angular_velocity", vec(m.angular_velocity)}});
    }
    obstacles.push_back(
        {{"name", ob.name}, {"primitive", primitive_json(ob.primitive)}, {"initial", pose_json(ob.initial)},
         {"script", script}});
  }

  const auto& c = s.controller;
  json controller = {{"kind", to_string(c.kind)},
                     {"reference", c.reference == ReferenceKind::kConstant ? "constant" : "proportional"},
                     {"constant_command", vec(c.constant_command)},
                     {"kp", c.kp},
                     {"cbf", cbf_json(c.cbf)},
                     {"mpc", mpc_json(c.mpc)},
                     {"box", {{"lower", vec(c.box.lower)}, {"upper", vec(c.box.upper)}}}};
  json noise = {{"enabled", s.noise.enabled},
                {"position_variance", s.noise.position_variance},
                {"planar", s.noise.planar},
                {"seed", s.noise.seed},
                {"accel_density", s.noise.process.accel_density},
                {"angular_accel_density", s.noise.process.angular_accel_density},
                {"freeze_rotation", s.noise.process.freeze_rotation}};
  json out = {{"name", s.name},
              {"description", s.description},
              {"robot", robot},
              {"obstacles", obstacles},
              {"controller", controller},
              {"noise", noise},
              {"dt", s.dt},
              {"duration", s.duration},
              {"target", vec(s.target)}};
  return out.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    Scenario s;
    s.name = j.value("name", std::string("custom"));
    s.description = j.value("description", std::string());
    const auto& r = j.at("robot");
    s.robot.dynamics = dynamics_from(r.at("dynamics").get<std::string>());
    for (const auto& seg : r.at("segments")) s.robot.segments.push_back(primitive_from(seg));
    s.robot.link_lengths = r.value("link_lengths", std::vector<double>{});
    s.robot.initial_state = to_vec(r.at("initial_state"));
    for (const auto& o : j.at("obstacles")) {
      ObstacleSpec ob;
      ob.name = o.value("name", std::string("obstacle"));
      ob.primitive = primitive_from(o.at("primitive"));
      ob.initial = pose_from(o.at("initial"));
      for (const auto& m : o.value("script", json::array())) {
        MotionSegment seg;
        seg.duration = m.at("duration").get<double>();
        seg.velocity = to_vec3(m.at("velocity"));
        if (m.contains("angular_velocity")) seg.angular_velocity = to_vec3(m.at("angular_velocity"));
        ob.script.push_back(seg);
      }
      s.obstacles.push_back(ob);
    }
    const auto& c = j.at("controller");
    s.controller.kind = controller_from(c.value("kind", std::string("tvcbfqp")));
    const auto ref = c.value("reference", std::string("proportional"));
    if (ref != "constant" && ref != "proportional") throw ParameterError("unknown reference '" + ref + "'");
    s.controller.reference = ref == "constant" ? ReferenceKind::kConstant : ReferenceKind::kProportional;
    if (c.contains("constant_command")) s.controller.constant_command = to_vec(c.at("constant_command"));
    s.controller.kp = c.value("kp", s.controller.kp);
    if (c.contains("cbf")) s.controller.cbf = cbf_from(c.at("cbf"));
    if (c.contains("mpc")) s.controller.mpc = mpc_from(c.at("mpc"));
    const auto& box = c.at("box");
    s.controller.box = ControlBox{to_vec(box.at("lower")), to_vec(box.at("upper"))};
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.noise.enabled = n.value("enabled", false);
      s.noise.position_variance = n.value("position_variance", s.noise.position_variance);
      s.noise.planar = n.value("planar", s.noise.planar);
      s.noise.seed = n.value("seed", s.noise.seed);
      s.noise.process.accel_density = n.value("accel_density", s.noise.process.accel_density);
      s.noise.process.angular_accel_density = n.value("angular_accel_density", s.noise.process.angular_accel_density);
      s.noise.process.freeze_rotation = n.value("freeze_rotation", s.noise.process.freeze_rotation);
    }
    s.dt = j.value("dt", s.dt);
    s.duration = j.value("duration", s.duration);
    s.target = to_vec(j.at("target"));
    return s;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed scenario config: ") + e.what());
  }
}

}  // namespace tvcbf
