#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "resalloc/algorithms.hpp"

namespace resalloc {

enum class Mode { Nominal, Compromised, ResilientLinear, ResilientNonlinear };

inline bool is_resilient(Mode m) {
  return m == Mode::ResilientLinear || m == Mode::ResilientNonlinear;
}

struct SimConfig {
  double t_end = 20.0;
  double dt = 1e-3;
  int record_stride = 1;
  double divergence_threshold = 1e9;  // on the state max-norm
  Exec exec = Exec::Serial;
};

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, double time, Eigen::Index comp)
      : std::runtime_error(what), t(time), component(comp) {}
  double t;
  Eigen::Index component;
};

using RhsFn = std::function<void(const Eigen::VectorXd&, double, Eigen::VectorXd&)>;

/// Classical 4-stage Runge-Kutta update; deterministic. Throws
/// DivergenceError on a non-finite derivative, naming t and the component.
Eigen::VectorXd rk4_step(const RhsFn& rhs, const Eigen::VectorXd& y, double t, double dt);

struct Trajectory {
  StateLayout layout;
  Mode mode = Mode::Nominal;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;  // one flat state vector per sample
  // Truth-side lumped disturbance [k1 + g; k2; k3] per sample, recorded by
  // the simulator for observer-error metrics (agents never see it).
  // Empty for plant-only modes.
  std::vector<Eigen::VectorXd> kappa_true;
  bool diverged = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;

  int n_samples() const { return static_cast<int>(times.size()); }
};

/// dt above which explicit integration of the observer modes is flagged:
/// 1 / (10 w0 max(a1, a2/w0)), with (a1, a2) = (w0, w0^2) for the
/// nonlinear variant.
double eso_dt_limit(const EsoConfig& cfg);

/// Integrates the selected mode from t = 0 to t_end. y0_plant stacks
/// [X(0); Lam(0); Z(0)]; observer modes extend it with gamma_hat(0) =
/// gamma(0) and kappa_hat(0) = 0. Samples are recorded at t = 0, after
/// every record_stride-th step, and at the final step. Divergence
/// (non-finite state or max-norm above the threshold) flags the trajectory
/// and returns the recorded prefix instead of raising.
Trajectory run_scenario(const AllocationProblem& p, const NetworkGraph& g,
                        const AttackSuite& suite, Mode mode, const EsoConfig& eso,
                        const SimConfig& sim, const Eigen::VectorXd& y0_plant);

struct RunMetrics {
  std::vector<double> times;
  std::vector<double> allocation_error;      // ||X(t) - X*||
  std::vector<double> feasibility;           // ||sum x_i - sum d_i||
  std::vector<double> multiplier_consensus;  // max_ij ||lam_i - lam_j||
  std::vector<double> observer_gamma_error;  // max_i ||gamma_i - gamma_hat_i||
  std::vector<double> observer_kappa_error;  // max_i ||kappa_i - kappa_hat_i||
  double tail_window = 0.0;
  double tail_allocation_error = 0.0;
  double tail_feasibility = 0.0;
  double tail_multiplier_consensus = 0.0;
  double tail_observer_gamma_error = 0.0;
  double tail_observer_kappa_error = 0.0;
  double overshoot = 0.0;  // max(0, max_t allocation_error - allocation_error(0))
  bool diverged = false;
};

/// Metric series plus suprema over the closing window [t_last - window,
/// t_last]. window <= 0 selects the default: 25% of the recorded horizon.
RunMetrics compute_metrics(const Trajectory& traj, const KktSolution& kkt,
                           double window = -1.0);

}  // namespace resalloc
