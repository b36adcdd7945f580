#include "tvcbf/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

namespace tvcbf::cli {
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(9);
  return out;
}

std::optional<ControllerKind> parse_controller(const std::string& name) {
  for (auto kind : {ControllerKind::kTvcbf, ControllerKind::kMpc, ControllerKind::kReference}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

int failures(const Trace& trace) {
  int n = 0;
  for (const auto& r : trace.records) {
    const bool mpc_failed = trace.controller == ControllerKind::kMpc && r.status != QpStatus::kOptimal;
    if (r.emergency || r.status == QpStatus::kMaxIter || mpc_failed) ++n;
  }
  return n;
}

void pair_columns(std::ostream& out, const char* prefix, int segments, int obstacles) {
  for (int i = 0; i < segments; ++i) {
    for (int j = 0; j < obstacles; ++j) out << "," << prefix << i << "_" << j;
  }
}

}  // namespace

Scenario resolve(const RunRequest& req, const std::vector<Scenario>& registry) {
  Scenario s;
  if (!req.config.empty()) {
    s = scenario_from_json(read_file(req.config));
  } else {
    const auto found = find_scenario(registry, req.scenario);
    if (!found) throw ParameterError("unknown scenario '" + req.scenario + "'");
    s = *found;
  }
  auto& cbf = s.controller.cbf;
  if (req.gamma) cbf.gamma = *req.gamma;
  if (req.beta) cbf.beta = *req.beta;
  if (req.k) cbf.k = *req.k;
  if (req.b) cbf.b = *req.b;
  if (req.time_varying) cbf.time_varying = *req.time_varying;
  if (req.noise_robust) cbf.noise_robust = *req.noise_robust;
  if (req.actuation_inflated) cbf.actuation_inflated = *req.actuation_inflated;
  if (req.rhs_only) cbf.rhs_only = *req.rhs_only;
  if (req.dt) {
    s.dt = *req.dt;
    cbf.dt = *req.dt;
  }
  if (req.duration) s.duration = *req.duration;
  if (req.seed) s.noise.seed = *req.seed;
  s.validate();
  return s;
}

RunOutcome execute(const Scenario& scenario, std::string* error) {
  RunOutcome o;
  try {
    o.trace = run(scenario);
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    o.code = kSolverFailure;
    return o;
  }
  if (o.trace.records.empty()) return o;
  o.metrics = metrics(o.trace);
  o.solver_failures = failures(o.trace);
  if (o.solver_failures > 0) {
    o.code = kSolverFailure;
  } else if (!(o.metrics.min_alpha >= 1.0)) {
    o.code = kUnsafe;
  }
  return o;
}

fs::path output_dir(const std::string& out, const std::string& name) {
  if (!out.empty()) return fs::path(out);
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "tvcbf_out") / name;
}

void write_artifacts(const Scenario& scenario, const RunOutcome& outcome, const fs::path& dir) {
  fs::create_directories(dir);
  const Trace& tr = outcome.trace;
  {
    auto out = open_out(dir / "trace.csv");
    write_trace_csv(tr, out);
  }
  {
    auto out = open_out(dir / "metrics.txt");
    out << "scenario = " << scenario.name << "\n"
        << "controller = " << to_string(scenario.controller.kind) << "\n"
        << "records = " << tr.records.size() << "\n";
    if (!tr.records.empty()) write_metrics(outcome.metrics, out);
    out << "solver_failures = " << outcome.solver_failures << "\n"
        << "exit_code = " << static_cast<int>(outcome.code) << "\n";
  }
  {
    auto out = open_out(dir / "scenario.json");
    out << scenario_to_json(scenario) << "\n";
  }
  {
    auto out = open_out(dir / "figure_h.csv");
    out << "t";
    pair_columns(out, "h_", tr.segments, tr.obstacles);
    out << "\n";
    for (const auto& r : tr.records) {
      out << r.t;
      for (double v : r.h) out << "," << v;
      out << "\n";
    }
  }
  {
    auto out = open_out(dir / "figure_distance.csv");
    out << "t";
    pair_columns(out, "alpha_", tr.segments, tr.obstacles);
    pair_columns(out, "dist_", tr.segments, tr.obstacles);
    out << "\n";
    for (const auto& r : tr.records) {
      out << r.t;
      for (double v : r.alpha) out << "," << v;
      for (double v : r.distance) out << "," << v;
      out << "\n";
    }
  }
  {
    auto out = open_out(dir / "figure_path.csv");
    out << "t,robot_x,robot_y";
    for (const auto& ob : scenario.obstacles) out << "," << ob.name << "_x," << ob.name << "_y";
    out << "\n";
    for (const auto& r : tr.records) {
      const Vec3 p = scenario.robot.tracking_point(r.state);
      out << r.t << "," << p.x() << "," << p.y();
      for (const auto& ob : scenario.obstacles) {
        const Vec3 q = ob.pose_at(r.t).position;
        out << "," << q.x() << "," << q.y();
      }
      out << "\n";
    }
  }
}

int cmd_list(const std::vector<Scenario>& registry, std::ostream& out) {
  for (const auto& s : registry) out << std::left << std::setw(26) << s.name << s.description << "\n";
  return kOk;
}

int cmd_run(const RunRequest& req, const std::vector<Scenario>& registry, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = resolve(req, registry);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::string failure;
  const RunOutcome o = execute(s, &failure);
  const fs::path dir = output_dir(req.out, s.name);
  try {
    write_artifacts(s, o, dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  out << std::setprecision(9);
  if (!failure.empty()) err << "solver failure: " << failure << "\n";
  out << "scenario " << s.name << " (" << to_string(s.controller.kind) << "), " << o.trace.records.size()
      << " ticks -> " << dir.string() << "\n";
  if (!o.trace.records.empty()) write_metrics(o.metrics, out);
  if (o.code == kUnsafe) err << "unsafe: min alpha* " << o.metrics.min_alpha << " < 1\n";
  if (o.solver_failures > 0) err << "solver failures on " << o.solver_failures << " ticks\n";
  return o.code;
}

int cmd_compare(const RunRequest& req, const std::vector<std::string>& controllers,
                const std::vector<Scenario>& registry, std::ostream& out, std::ostream& err) {
  std::vector<Scenario> runs;
  try {
    const Scenario base = resolve(req, registry);
    for (const auto& name : controllers) {
      const auto kind = parse_controller(name);
      if (!kind) throw ParameterError("unknown controller '" + name + "'");
      Scenario s = base;
      s.controller.kind = *kind;
      s.validate();
      runs.push_back(s);
    }
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const fs::path root = output_dir(req.out, runs.empty() ? req.scenario : runs.front().name);
  int code = kOk;
  std::ostringstream table;
  table << std::setprecision(9) << std::left;
  table << std::setw(12) << "controller" << std::setw(16) << "min_alpha" << std::setw(24) << "max_lateral_deviation"
        << std::setw(18) << "mean_solve_time" << "target_reached\n";
  std::ofstream csv;
  fs::create_directories(root);
  csv.open(root / "compare.csv");
  csv << std::setprecision(9) << "controller,min_alpha,max_lateral_deviation,mean_solve_time,target_reached,exit_code\n";
  for (const auto& s : runs) {
    std::string failure;
    const RunOutcome o = execute(s, &failure);
    if (!failure.empty()) err << to_string(s.controller.kind) << ": solver failure: " << failure << "\n";
    write_artifacts(s, o, root / to_string(s.controller.kind));
    code = std::max(code, static_cast<int>(o.code));
    const Metrics& m = o.metrics;
    table << std::setw(12) << to_string(s.controller.kind) << std::setw(16) << m.min_alpha << std::setw(24)
          << m.max_lateral_deviation << std::setw(18) << m.mean_solve_time << (m.target_reached ? "true" : "false")
          << "\n";
    csv << to_string(s.controller.kind) << "," << m.min_alpha << "," << m.max_lateral_deviation << ","
        << m.mean_solve_time << "," << (m.target_reached ? "true" : "false") << "," << static_cast<int>(o.code)
        << "\n";
  }
  out << table.str();
  return code;
}

namespace {

struct ModeFlags {
  std::string time_varying, noise_robust, actuation_inflated, rhs_only;
};

void add_run_options(CLI::App* cmd, RunRequest& req, ModeFlags& modes) {
  const auto onoff = CLI::IsMember({"on", "off", "true", "false", "1", "0"});
  cmd->add_option("--scenario", req.scenario, "built-in scenario name");
  cmd->add_option("--config", req.config, "scenario config file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", req.seed, "noise RNG seed");
  cmd->add_option("--out", req.out, "output directory");
  cmd->add_option("--gamma", req.gamma, "class-K gain");
  cmd->add_option("--beta", req.beta, "safety margin on alpha*");
  cmd->add_option("--k", req.k, "Mahalanobis bound");
  cmd->add_option("--b", req.b, "actuation inflation gain");
  cmd->add_option("--dt", req.dt, "control tick (s)");
  cmd->add_option("--duration", req.duration, "simulated time (s)");
  cmd->add_option("--time-varying", modes.time_varying, "on|off")->check(onoff);
  cmd->add_option("--noise-robust", modes.noise_robust, "on|off")->check(onoff);
  cmd->add_option("--actuation-inflated", modes.actuation_inflated, "on|off")->check(onoff);
  cmd->add_option("--rhs-only", modes.rhs_only, "on|off")->check(onoff);
}

std::optional<bool> as_bool(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return v == "on" || v == "true" || v == "1";
}

}  // namespace

int main(int argc, const char* const* argv, const std::vector<Scenario>& registry, std::ostream& out,
         std::ostream& err) {
  CLI::App app{"Time-varying CBF safety filter: scenario runner"};
  app.name("tvcbf");
  app.require_subcommand(1);
  RunRequest req;
  ModeFlags modes;
  std::vector<std::string> controllers = {"tvcbfqp", "mpc"};
  auto* list = app.add_subcommand("list", "list built-in scenarios");
  auto* run_cmd = app.add_subcommand("run", "run one scenario and write its artifacts");
  auto* compare = app.add_subcommand("compare", "run several controllers on one scenario");
  add_run_options(run_cmd, req, modes);
  add_run_options(compare, req, modes);
  compare->add_option("--controllers", controllers, "comma-separated list: tvcbfqp, mpc, reference")
      ->delimiter(',');
  for (auto* cmd : {run_cmd, compare}) {
    cmd->callback([cmd] {
      if (cmd->count("--scenario") + cmd->count("--config") != 1) {
        throw CLI::ValidationError("exactly one of --scenario and --config is required");
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    if (rc == 0) return kOk;
    err << app.help();
    return kUsage;
  }
  req.time_varying = as_bool(modes.time_varying);
  req.noise_robust = as_bool(modes.noise_robust);
  req.actuation_inflated = as_bool(modes.actuation_inflated);
  req.rhs_only = as_bool(modes.rhs_only);

  if (list->parsed()) return cmd_list(registry, out);
  if (run_cmd->parsed()) return cmd_run(req, registry, out, err);
  return cmd_compare(req, controllers, registry, out, err);
}

}  // namespace tvcbf::cli
