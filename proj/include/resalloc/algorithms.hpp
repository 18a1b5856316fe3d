#pragma once

#include <Eigen/Dense>
#include <limits>

#include "resalloc/attacks.hpp"
#include "resalloc/graph.hpp"
#include "resalloc/problem.hpp"

namespace resalloc {

/// fal(e, alpha, delta) = e * delta^(alpha-1) for |e| <= delta,
/// |e|^alpha * sign(e) outside. Odd, continuous (both branches meet at
/// delta^alpha), monotone nondecreasing.
double fal(double e, double alpha, double delta);
Eigen::VectorXd fal(const Eigen::VectorXd& e, double alpha, double delta);

/// Correction shape for the nonlinear observer channels.
struct HSpec {
  enum class Kind { Identity, Fal };
  Kind kind = Kind::Identity;
  double alpha = 0.125;
  double delta = 0.5;

  Eigen::VectorXd operator()(const Eigen::VectorXd& e) const;
  void validate(const char* name) const;
};

struct EsoConfig {
  enum class Variant { Linear, Nonlinear };
  Variant variant = Variant::Linear;
  double w0 = 50.0;
  // Linear variant: net correction gains a1*w0 on gamma_hat and a2*w0^2 on
  // kappa_hat; requires a1, a2 > 0 ([[-a1, 1], [-a2, 0]] Hurwitz).
  double a1 = 2.0;
  double a2 = 1.0;
  // Nonlinear variant: gains w0 and w0^2 with shapes h1, h2.
  HSpec h1{HSpec::Kind::Identity, 0.125, 0.5};
  HSpec h2{HSpec::Kind::Fal, 0.125, 0.5};
  // Symmetric clamp on the disturbance estimate wherever it is fed back;
  // infinity = off (default).
  double kappa_hat_clamp = std::numeric_limits<double>::infinity();

  void validate() const;
};

/// Flat state layout; every block stacks n_agents sub-blocks of size dim.
///   plant-only modes: [X; Lam; Z]
///   observer modes:   [X; Lam; Z; x_hat; lam_hat; z_hat; k1_hat; k2_hat; k3_hat]
struct StateLayout {
  int n_agents = 0;
  int dim = 0;
  bool observer = false;
  Eigen::Index block() const { return static_cast<Eigen::Index>(n_agents) * dim; }
  Eigen::Index size() const { return block() * (observer ? 9 : 3); }
};

/// x_i' = -grad f_i(x_i) - lam_i
/// lam_i' = -sum_j a_ij(lam_i - lam_j) - sum_j a_ij(z_i - z_j) + x_i - d_i
/// z_i' = sum_j a_ij(lam_i - lam_j)
/// (the plant drift g_i is known here and cancelled exactly).
void nominal_rhs(const Eigen::VectorXd& y, const AllocationProblem& p,
                 const NetworkGraph& g, Eigen::VectorXd& dy, Exec exec = Exec::Serial);

/// nominal_rhs plus the additive lumped attacks (kappa_1, kappa_2, kappa_3).
void compromised_rhs(const Eigen::VectorXd& y, double t, const AllocationProblem& p,
                     const NetworkGraph& g, const AttackSuite& suite,
                     Eigen::VectorXd& dy, Exec exec = Exec::Serial);

/// One agent's extended-state observer, gamma/kappa blocks of size 3*dim:
/// with e = gamma - gamma_hat,
///   gamma_hat' = kappa_hat + u_io + gain1 h1(e)
///   kappa_hat' = gain2 h2(e)
/// where (gain1 h1, gain2 h2) = (a1 w0 e, a2 w0^2 e) for the linear variant
/// and (w0 h1(e), w0^2 h2(e)) for the nonlinear one.
void observer_rhs(const Eigen::VectorXd& gamma_hat, const Eigen::VectorXd& kappa_hat,
                  const Eigen::VectorXd& gamma, const Eigen::VectorXd& u_io,
                  const EsoConfig& cfg, Eigen::VectorXd& gamma_hat_dot,
                  Eigen::VectorXd& kappa_hat_dot);

/// Resilient closed loop: plant truth plus per-agent observers. The drift
/// g_i is unknown to the controller; k1_hat estimates the lump
/// kappa_i1 + g_i, which is cancelled as one block and never decomposed.
/// Plant truth:
///   x_i'   = g_i(x_i) - grad f_i(x_i) - lam_i + kappa_i1 - k1_hat_i
///   lam_i' = [nominal lam' expr] + kappa_i2 - k2_hat_i
///   z_i'   = [nominal z' expr]   + kappa_i3 - k3_hat_i
/// Observer feed u_io = (-grad f_i - lam_i - k1_hat_i,
///                       [nominal lam' expr] - k2_hat_i,
///                       [nominal z' expr]   - k3_hat_i).
void resilient_rhs(const Eigen::VectorXd& y, double t, const AllocationProblem& p,
                   const NetworkGraph& g, const AttackSuite& suite, const EsoConfig& cfg,
                   Eigen::VectorXd& dy, Exec exec = Exec::Serial);

/// (X*, 1 (x) lambda*, Z*) where Z* is the minimum-norm solution of
/// (L (x) I) Z* = X* - D - (L (x) I) Lam*. Any solution of that equation
/// makes nominal_rhs vanish; the minimum-norm one is reported.
Eigen::VectorXd equilibrium_state(const AllocationProblem& p, const NetworkGraph& g,
                                  const KktSolution& kkt);

}  // namespace resalloc
