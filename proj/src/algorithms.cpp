#include "resalloc/algorithms.hpp"

#include <cmath>
#include <stdexcept>

namespace resalloc {

double fal(double e, double alpha, double delta) {
  if (std::abs(e) <= delta) return e * std::pow(delta, alpha - 1.0);
  return std::copysign(std::pow(std::abs(e), alpha), e);
}

Eigen::VectorXd fal(const Eigen::VectorXd& e, double alpha, double delta) {
  const double slope = std::pow(delta, alpha - 1.0);
  Eigen::VectorXd out(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    const double ek = e[k];
    out[k] = std::abs(ek) <= delta ? ek * slope
                                   : std::copysign(std::pow(std::abs(ek), alpha), ek);
  }
  return out;
}

Eigen::VectorXd HSpec::operator()(const Eigen::VectorXd& e) const {
  if (kind == Kind::Identity) return e;
  return fal(e, alpha, delta);
}

void HSpec::validate(const char* name) const {
  if (kind == Kind::Identity) return;
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument(std::string(name) + ": fal alpha must lie in (0, 1)");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument(std::string(name) + ": fal delta must be positive");
}

void EsoConfig::validate() const {
  if (!(w0 > 0.0) || !std::isfinite(w0))
    throw std::invalid_argument("eso: w0 must be positive and finite");
  if (variant == Variant::Linear) {
    if (!(a1 > 0.0) || !(a2 > 0.0))
      throw std::invalid_argument("eso: linear gains a1, a2 must be positive");
  } else {
    h1.validate("eso.h1");
    h2.validate("eso.h2");
  }
  if (!(kappa_hat_clamp > 0.0))
    throw std::invalid_argument("eso: kappa_hat_clamp must be positive (infinity = off)");
}

namespace {

// Shared plant equations; kappa == nullptr gives the attack-free loop.
void closed_loop_core(const Eigen::VectorXd& y, const AllocationProblem& p,
                      const NetworkGraph& g, const KappaAggregates* kappa,
                      Eigen::VectorXd& dy, Exec exec) {
  const int n = p.n_agents();
  const int d = p.decision_dim();
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  if (g.n_agents() != n)
    throw std::invalid_argument("rhs: problem/graph agent count mismatch");
  if (y.size() != 3 * nd)
    throw std::invalid_argument("rhs: state must stack [X; Lam; Z]");
  dy.resize(y.size());

  const auto X = y.segment(0, nd);
  const auto Lam = y.segment(nd, nd);
  const auto Z = y.segment(2 * nd, nd);
  Eigen::VectorXd LLam(nd), LZ(nd);
  laplacian_apply(g, Lam, d, LLam, exec);
  laplacian_apply(g, Z, d, LZ, exec);

  auto agent = [&](int i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * d;
    const auto xi = X.segment(o, d);
    dy.segment(o, d) = -p.cost(i).gradient(xi) - Lam.segment(o, d);
    dy.segment(nd + o, d) = -LLam.segment(o, d) - LZ.segment(o, d) + xi - p.demand(i);
    dy.segment(2 * nd + o, d) = LLam.segment(o, d);
    if (kappa) {
      dy.segment(o, d) += kappa->k1.segment(o, d);
      dy.segment(nd + o, d) += kappa->k2.segment(o, d);
      dy.segment(2 * nd + o, d) += kappa->k3.segment(o, d);
    }
  };
#ifdef _OPENMP
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) agent(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) agent(i);
}

}  // namespace

void nominal_rhs(const Eigen::VectorXd& y, const AllocationProblem& p,
                 const NetworkGraph& g, Eigen::VectorXd& dy, Exec exec) {
  closed_loop_core(y, p, g, nullptr, dy, exec);
}

void compromised_rhs(const Eigen::VectorXd& y, double t, const AllocationProblem& p,
                     const NetworkGraph& g, const AttackSuite& suite,
                     Eigen::VectorXd& dy, Exec exec) {
  const int d = p.decision_dim();
  const Eigen::Index nd = static_cast<Eigen::Index>(p.n_agents()) * d;
  if (y.size() != 3 * nd)
    throw std::invalid_argument("rhs: state must stack [X; Lam; Z]");
  const KappaAggregates kappa = kappa_aggregates(
      suite, g, t, y.segment(0, nd), y.segment(nd, nd), y.segment(2 * nd, nd), d, exec);
  closed_loop_core(y, p, g, &kappa, dy, exec);
}

void observer_rhs(const Eigen::VectorXd& gamma_hat, const Eigen::VectorXd& kappa_hat,
                  const Eigen::VectorXd& gamma, const Eigen::VectorXd& u_io,
                  const EsoConfig& cfg, Eigen::VectorXd& gamma_hat_dot,
                  Eigen::VectorXd& kappa_hat_dot) {
  if (gamma_hat.size() != gamma.size() || kappa_hat.size() != gamma.size() ||
      u_io.size() != gamma.size())
    throw std::invalid_argument("observer: gamma, kappa and u_io blocks must share dimension");
  const Eigen::VectorXd e = gamma - gamma_hat;
  if (cfg.variant == EsoConfig::Variant::Linear) {
    gamma_hat_dot = kappa_hat + u_io + cfg.a1 * cfg.w0 * e;
    kappa_hat_dot = cfg.a2 * cfg.w0 * cfg.w0 * e;
  } else {
    gamma_hat_dot = kappa_hat + u_io + cfg.w0 * cfg.h1(e);
    kappa_hat_dot = cfg.w0 * cfg.w0 * cfg.h2(e);
  }
}

void resilient_rhs(const Eigen::VectorXd& y, double t, const AllocationProblem& p,
                   const NetworkGraph& g, const AttackSuite& suite, const EsoConfig& cfg,
                   Eigen::VectorXd& dy, Exec exec) {
  const int n = p.n_agents();
  const int d = p.decision_dim();
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  if (g.n_agents() != n)
    throw std::invalid_argument("rhs: problem/graph agent count mismatch");
  if (y.size() != 9 * nd)
    throw std::invalid_argument(
        "rhs: resilient state must stack [X; Lam; Z; gamma_hat; kappa_hat]");
  dy.resize(y.size());

  const auto X = y.segment(0, nd);
  const auto Lam = y.segment(nd, nd);
  const auto Z = y.segment(2 * nd, nd);
  const auto Xh = y.segment(3 * nd, nd);
  const auto Lamh = y.segment(4 * nd, nd);
  const auto Zh = y.segment(5 * nd, nd);
  const auto K1h = y.segment(6 * nd, nd);
  const auto K2h = y.segment(7 * nd, nd);
  const auto K3h = y.segment(8 * nd, nd);

  Eigen::VectorXd LLam(nd), LZ(nd);
  laplacian_apply(g, Lam, d, LLam, exec);
  laplacian_apply(g, Z, d, LZ, exec);
  const KappaAggregates kappa = kappa_aggregates(suite, g, t, X, Lam, Z, d, exec);

  const bool clamped = std::isfinite(cfg.kappa_hat_clamp);
  const double lim = cfg.kappa_hat_clamp;
  const bool linear = cfg.variant == EsoConfig::Variant::Linear;
  const double gain1 = linear ? cfg.a1 * cfg.w0 : cfg.w0;
  const double gain2 = linear ? cfg.a2 * cfg.w0 * cfg.w0 : cfg.w0 * cfg.w0;

  auto agent = [&](int i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * d;
    const auto xi = X.segment(o, d);
    const auto lami = Lam.segment(o, d);
    const Eigen::VectorXd grad = p.cost(i).gradient(xi);

    Eigen::VectorXd k1h = K1h.segment(o, d);
    Eigen::VectorXd k2h = K2h.segment(o, d);
    Eigen::VectorXd k3h = K3h.segment(o, d);
    if (clamped) {
      k1h = k1h.cwiseMax(-lim).cwiseMin(lim);
      k2h = k2h.cwiseMax(-lim).cwiseMin(lim);
      k3h = k3h.cwiseMax(-lim).cwiseMin(lim);
    }

    const Eigen::VectorXd nom_lam =
        -LLam.segment(o, d) - LZ.segment(o, d) + xi - p.demand(i);
    const Eigen::VectorXd nom_z = LLam.segment(o, d);

    // Plant truth; the controller applies -k1h in place of the unknown
    // kappa_i1 + g_i.
    dy.segment(o, d) = p.drift(i, xi) - grad - lami + kappa.k1.segment(o, d) - k1h;
    dy.segment(nd + o, d) = nom_lam + kappa.k2.segment(o, d) - k2h;
    dy.segment(2 * nd + o, d) = nom_z + kappa.k3.segment(o, d) - k3h;

    // Observer: innovation on gamma = (x, lam, z).
    const Eigen::VectorXd e1 = xi - Xh.segment(o, d);
    const Eigen::VectorXd e2 = lami - Lamh.segment(o, d);
    const Eigen::VectorXd e3 = Z.segment(o, d) - Zh.segment(o, d);
    if (linear) {
      dy.segment(3 * nd + o, d) = k1h + (-grad - lami - k1h) + gain1 * e1;
      dy.segment(4 * nd + o, d) = k2h + (nom_lam - k2h) + gain1 * e2;
      dy.segment(5 * nd + o, d) = k3h + (nom_z - k3h) + gain1 * e3;
      dy.segment(6 * nd + o, d) = gain2 * e1;
      dy.segment(7 * nd + o, d) = gain2 * e2;
      dy.segment(8 * nd + o, d) = gain2 * e3;
    } else {
      dy.segment(3 * nd + o, d) = k1h + (-grad - lami - k1h) + gain1 * cfg.h1(e1);
      dy.segment(4 * nd + o, d) = k2h + (nom_lam - k2h) + gain1 * cfg.h1(e2);
      dy.segment(5 * nd + o, d) = k3h + (nom_z - k3h) + gain1 * cfg.h1(e3);
      dy.segment(6 * nd + o, d) = gain2 * cfg.h2(e1);
      dy.segment(7 * nd + o, d) = gain2 * cfg.h2(e2);
      dy.segment(8 * nd + o, d) = gain2 * cfg.h2(e3);
    }
  };
#ifdef _OPENMP
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) agent(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) agent(i);
}

namespace {

Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& L, int d) {
  const Eigen::Index n = L.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      K.block(i * d, j * d, d, d) = L(i, j) * Eigen::MatrixXd::Identity(d, d);
  return K;
}

}  // namespace

Eigen::VectorXd equilibrium_state(const AllocationProblem& p, const NetworkGraph& g,
                                  const KktSolution& kkt) {
  const int n = p.n_agents();
  const int d = p.decision_dim();
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  Eigen::VectorXd lam_star(nd), demand(nd);
  for (int i = 0; i < n; ++i) {
    lam_star.segment(static_cast<Eigen::Index>(i) * d, d) = kkt.lambda_star;
    demand.segment(static_cast<Eigen::Index>(i) * d, d) = p.demand(i);
  }
  const Eigen::MatrixXd K = kron_identity(g.laplacian(), d);
  const Eigen::VectorXd rhs = kkt.x_star - demand - K * lam_star;
  const Eigen::VectorXd z_star = K.completeOrthogonalDecomposition().solve(rhs);

  Eigen::VectorXd eq(3 * nd);
  eq << kkt.x_star, lam_star, z_star;
  return eq;
}

}  // namespace resalloc
