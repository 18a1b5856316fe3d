#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "resalloc/graph.hpp"

namespace resalloc {

/// Agent-local plant state handed to state-dependent attack maps.
struct AgentView {
  Eigen::Ref<const Eigen::VectorXd> x;
  Eigen::Ref<const Eigen::VectorXd> lambda;
  Eigen::Ref<const Eigen::VectorXd> z;
};

/// One bounded injected signal (t, local state) -> vector. Evaluation is
/// pure; signals are immutable after construction.
class AttackSignal {
 public:
  AttackSignal() : impl_(Zero{}) {}

  static AttackSignal zero() { return AttackSignal(); }

  /// amplitude * cos(omega t + phase), broadcast across components.
  static AttackSignal sinusoid(double amplitude, double omega, double phase = 0.0);

  /// C exp(S t) x0. S must be marginally stable (all eigenvalues on the
  /// imaginary axis); semisimplicity is not verified. `bound` is an optional
  /// declared sup-norm carried for reporting (NaN = undeclared).
  static AttackSignal exosystem(Eigen::MatrixXd S, Eigen::MatrixXd C,
                                Eigen::VectorXd x0,
                                double bound = std::numeric_limits<double>::quiet_NaN());

  /// map(view) clamped componentwise to [-s_max, s_max]. The map sees only
  /// the agent's own (x_i, lambda_i, z_i) and must be smooth in them.
  static AttackSignal state_dependent(std::function<Eigen::VectorXd(const AgentView&)> map,
                                      double s_max);

  bool is_zero() const { return std::holds_alternative<Zero>(impl_); }

  /// |amplitude| for sinusoids, s_max for state-dependent signals, 0 for
  /// zero, the declared value (possibly NaN) for exosystems.
  double bound() const;

  /// Signal value at time t for local state `view`, broadcast or validated
  /// to dimension dim.
  Eigen::VectorXd eval(double t, const AgentView& view, int dim) const;

  /// The same signal with all output values multiplied by factor >= 0.
  AttackSignal scaled(double factor) const;

 private:
  struct Zero {};
  struct Sinusoid {
    double amplitude, omega, phase;
  };
  struct Exo {
    Eigen::MatrixXd S, C;
    Eigen::VectorXd x0;
    double bound;
  };
  struct StateDep {
    std::function<Eigen::VectorXd(const AgentView&)> map;
    double s_max;
  };
  std::variant<Zero, Sinusoid, Exo, StateDep> impl_;
};

/// Per-agent triple of injected signals: actuator u_i^a and the sensed
/// lambda / z channels. Channels default to zero.
class AttackSuite {
 public:
  explicit AttackSuite(int n_agents);

  int n_agents() const { return static_cast<int>(actuator_.size()); }
  void set_actuator(int i, AttackSignal s) { actuator_.at(i) = std::move(s); }
  void set_lambda(int i, AttackSignal s) { lambda_.at(i) = std::move(s); }
  void set_z(int i, AttackSignal s) { z_.at(i) = std::move(s); }
  const AttackSignal& actuator(int i) const { return actuator_[i]; }
  const AttackSignal& lambda(int i) const { return lambda_[i]; }
  const AttackSignal& z(int i) const { return z_[i]; }

  /// When set, an agent's own lambda_i^a and z_i^a are zeroed inside its
  /// kappa aggregates (only neighbor readings are corrupted). Default off.
  void set_neighbors_only(bool v) { neighbors_only_ = v; }
  bool neighbors_only() const { return neighbors_only_; }

  bool all_zero() const;
  AttackSuite scaled(double factor) const;

 private:
  std::vector<AttackSignal> actuator_, lambda_, z_;
  bool neighbors_only_ = false;
};

/// Lumped attack disturbances, each stacked n_agents x dim:
///   k1 block i = u_i^a
///   k2 block i = -sum_j a_ij(lam_i^a - lam_j^a) - sum_j a_ij(z_i^a - z_j^a)
///   k3 block i =  sum_j a_ij(lam_i^a - lam_j^a)
struct KappaAggregates {
  Eigen::VectorXd k1, k2, k3;
};

KappaAggregates kappa_aggregates(const AttackSuite& suite, const NetworkGraph& g,
                                 double t, const Eigen::VectorXd& X,
                                 const Eigen::VectorXd& Lam, const Eigen::VectorXd& Z,
                                 int dim, Exec exec = Exec::Serial);

}  // namespace resalloc
