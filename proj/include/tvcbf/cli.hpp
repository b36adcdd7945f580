#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tvcbf/sim.hpp"

namespace tvcbf::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kUnsafe = 2, kSolverFailure = 3 };

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "TVCBF_OUTPUT_ROOT";

struct RunRequest {
  std::string scenario;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> gamma, beta, k, b, dt, duration;
  std::optional<bool> time_varying, noise_robust, actuation_inflated, rhs_only;
};

/// Loads the named built-in or the config file, applies overrides and
/// validates. Throws ParameterError.
Scenario resolve(const RunRequest& req, const std::vector<Scenario>& registry);

struct RunOutcome {
  Trace trace;
  Metrics metrics;
  /// Ticks with an emergency stop, an iteration-capped QP or a failed MPC solve.
  int solver_failures = 0;
  ExitCode code = kOk;
};

/// Runs the scenario; solver exceptions become kSolverFailure with an empty trace.
RunOutcome execute(const Scenario& scenario, std::string* error = nullptr);

/// trace.csv, metrics.txt, scenario.json and the figure series.
void write_artifacts(const Scenario& scenario, const RunOutcome& outcome, const std::filesystem::path& dir);

/// Output directory: --out, else $TVCBF_OUTPUT_ROOT/<name>, else tvcbf_out/<name>.
std::filesystem::path output_dir(const std::string& out, const std::string& name);

int cmd_list(const std::vector<Scenario>& registry, std::ostream& out);
int cmd_run(const RunRequest& req, const std::vector<Scenario>& registry, std::ostream& out, std::ostream& err);
int cmd_compare(const RunRequest& req, const std::vector<std::string>& controllers,
                const std::vector<Scenario>& registry, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int main(int argc, const char* const* argv, const std::vector<Scenario>& registry, std::ostream& out,
         std::ostream& err);

}  // namespace tvcbf::cli
