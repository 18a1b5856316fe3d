#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "resalloc/sim.hpp"

namespace resalloc {

// Configuration or semantic validation failure; the message carries the
// offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SignalSpec {
  enum class Kind { Zero, Sinusoid, Exosystem };
  Kind kind = Kind::Zero;
  double amplitude = 0.0, omega = 0.0, phase = 0.0;  // sinusoid
  Eigen::MatrixXd S, C;                              // exosystem
  Eigen::VectorXd x0;
};

struct AttackSpec {
  std::vector<SignalSpec> actuator, lambda, z;  // empty, single (broadcast), or one per agent
  bool neighbors_only = false;
  double scale = 1.0;  // multiplies every signal; the sweepable attack amplitude
};

struct ScenarioConfig {
  Mode mode = Mode::Nominal;
  int n_agents = 0;
  std::vector<Edge> edges;
  int decision_dim = 1;
  std::vector<Quadratic> costs;
  std::vector<Eigen::VectorXd> demands;
  std::string drift = "none";  // "none" | "sin"
  AttackSpec attacks;
  EsoConfig eso;
  SimConfig sim;
  double tail_window = -1.0;  // <= 0 selects the default 25% window
  Eigen::VectorXd x0, lam0, z0;
};

/// Parse + validate a config document. Unknown keys are rejected with their
/// field path; the graph must be connected; only fully valid configs return.
ScenarioConfig load_config_text(const std::string& text);
ScenarioConfig load_config_file(const std::string& path);

/// Canonical echo: alphabetically sorted keys, full expansion of defaults.
/// load_config_text(echo_config(c)) reproduces c.
std::string echo_config(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
std::string preset_summary(const std::string& name);
ScenarioConfig preset(const std::string& name);

NetworkGraph build_graph(const ScenarioConfig& cfg);
AllocationProblem build_problem(const ScenarioConfig& cfg);
AttackSuite build_suite(const AttackSpec& spec, int n_agents);

struct RunResult {
  Trajectory traj;
  RunMetrics metrics;
  KktSolution kkt;
};

RunResult execute(const ScenarioConfig& cfg);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_metrics(std::ostream& os, const ScenarioConfig& cfg, const RunResult& result,
                   double rho2);

/// Runs the scenario and writes config.json, trajectory.csv and metrics.txt
/// into out_dir (created if missing). Divergence is recorded, not thrown.
RunResult run_to_directory(const ScenarioConfig& cfg, const std::string& out_dir);

struct SweepRow {
  double value = 0.0;
  RunMetrics metrics;
  std::string dir;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepRow> rows;
};

/// Re-runs cfg once per value of parameter ("w0", "dt" or
/// "attack_amplitude"), each row in its own subdirectory row_<k> of out_dir,
/// plus a summary.csv. Rows are independent; jobs > 1 runs them concurrently.
SweepResult sweep(const ScenarioConfig& cfg, const std::string& parameter,
                  const std::vector<double>& values, const std::string& out_dir, int jobs = 1);

void write_sweep_summary(std::ostream& os, const SweepResult& result);

}  // namespace resalloc
