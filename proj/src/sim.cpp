#include "resalloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace resalloc {

namespace {

void check_finite(const Eigen::VectorXd& dy, double t) {
  if (dy.allFinite()) return;
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (!std::isfinite(dy[i])) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "non-finite derivative at t = %.17g, component %ld", t,
                    static_cast<long>(i));
      throw DivergenceError(buf, t, i);
    }
  }
}

}  // namespace

Eigen::VectorXd rk4_step(const RhsFn& rhs, const Eigen::VectorXd& y, double t, double dt) {
  Eigen::VectorXd k1, k2, k3, k4;
  rhs(y, t, k1);
  check_finite(k1, t);
  rhs(y + 0.5 * dt * k1, t + 0.5 * dt, k2);
  check_finite(k2, t + 0.5 * dt);
  rhs(y + 0.5 * dt * k2, t + 0.5 * dt, k3);
  check_finite(k3, t + 0.5 * dt);
  rhs(y + dt * k3, t + dt, k4);
  check_finite(k4, t + dt);
  return y + dt * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
}

double eso_dt_limit(const EsoConfig& cfg) {
  double a1 = cfg.a1, a2 = cfg.a2;
  if (cfg.variant == EsoConfig::Variant::Nonlinear) {
    a1 = cfg.w0;
    a2 = cfg.w0 * cfg.w0;
  }
  return 1.0 / (10.0 * cfg.w0 * std::max(a1, a2 / cfg.w0));
}

Trajectory run_scenario(const AllocationProblem& p, const NetworkGraph& g,
                        const AttackSuite& suite, Mode mode, const EsoConfig& eso,
                        const SimConfig& sim, const Eigen::VectorXd& y0_plant) {
  if (g.n_agents() != p.n_agents())
    throw std::invalid_argument("graph and problem disagree on the number of agents");
  if (!g.is_connected()) throw std::invalid_argument("graph is not connected");
  if (!(sim.t_end > 0.0) || !std::isfinite(sim.t_end))
    throw std::invalid_argument("t_end must be positive");
  if (!(sim.dt > 0.0) || !std::isfinite(sim.dt))
    throw std::invalid_argument("dt must be positive");
  if (sim.record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
  if (!(sim.divergence_threshold > 0.0))
    throw std::invalid_argument("divergence_threshold must be positive");

  const int n = p.n_agents();
  const int d = p.decision_dim();
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  if (y0_plant.size() != 3 * nd)
    throw std::invalid_argument("initial state must stack [X; Lam; Z]");

  Trajectory traj;
  traj.layout = StateLayout{n, d, is_resilient(mode)};
  traj.mode = mode;

  EsoConfig cfg = eso;  // the mode, not the config, selects the variant
  RhsFn rhs;
  switch (mode) {
    case Mode::Nominal:
      rhs = [&](const Eigen::VectorXd& y, double, Eigen::VectorXd& dy) {
        nominal_rhs(y, p, g, dy, sim.exec);
      };
      break;
    case Mode::Compromised:
      rhs = [&](const Eigen::VectorXd& y, double t, Eigen::VectorXd& dy) {
        compromised_rhs(y, t, p, g, suite, dy, sim.exec);
      };
      break;
    case Mode::ResilientLinear:
    case Mode::ResilientNonlinear:
      cfg.variant = mode == Mode::ResilientLinear ? EsoConfig::Variant::Linear
                                                  : EsoConfig::Variant::Nonlinear;
      cfg.validate();
      rhs = [&, cfg](const Eigen::VectorXd& y, double t, Eigen::VectorXd& dy) {
        resilient_rhs(y, t, p, g, suite, cfg, dy, sim.exec);
      };
      if (sim.dt > eso_dt_limit(cfg)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "dt = %g exceeds the observer resolution limit %g for w0 = %g; "
                      "expect degraded estimates",
                      sim.dt, eso_dt_limit(cfg), cfg.w0);
        traj.warnings.emplace_back(buf);
      }
      break;
  }

  Eigen::VectorXd y(traj.layout.size());
  y.segment(0, 3 * nd) = y0_plant;
  if (traj.layout.observer) {
    y.segment(3 * nd, 3 * nd) = y0_plant;  // gamma_hat(0) = gamma(0)
    y.segment(6 * nd, 3 * nd).setZero();   // kappa_hat(0) = 0
  }

  const long steps = std::max(1L, std::lround(sim.t_end / sim.dt));
  if (std::abs(steps * sim.dt - sim.t_end) > 1e-9 * std::max(1.0, sim.t_end)) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "horizon rounded to %ld steps of dt = %g", steps, sim.dt);
    traj.warnings.emplace_back(buf);
  }

  auto record = [&](double t, const Eigen::VectorXd& state) {
    traj.times.push_back(t);
    traj.states.push_back(state);
    if (!traj.layout.observer) return;
    KappaAggregates k = kappa_aggregates(suite, g, t, state.segment(0, nd),
                                         state.segment(nd, nd), state.segment(2 * nd, nd), d,
                                         sim.exec);
    Eigen::VectorXd kt(3 * nd);
    kt.segment(0, nd) = k.k1;
    for (int i = 0; i < n; ++i)
      kt.segment(static_cast<Eigen::Index>(i) * d, d) +=
          p.drift(i, state.segment(static_cast<Eigen::Index>(i) * d, d));
    kt.segment(nd, nd) = k.k2;
    kt.segment(2 * nd, nd) = k.k3;
    traj.kappa_true.push_back(std::move(kt));
  };

  record(0.0, y);
  for (long m = 1; m <= steps; ++m) {
    const double t = static_cast<double>(m - 1) * sim.dt;
    try {
      y = rk4_step(rhs, y, t, sim.dt);
    } catch (const DivergenceError&) {
      traj.diverged = true;
      traj.divergence_time = t;
      return traj;
    }
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > sim.divergence_threshold) {
      traj.diverged = true;
      traj.divergence_time = static_cast<double>(m) * sim.dt;
      return traj;
    }
    if (m % sim.record_stride == 0 || m == steps)
      record(static_cast<double>(m) * sim.dt, y);
  }
  return traj;
}

RunMetrics compute_metrics(const Trajectory& traj, const KktSolution& kkt, double window) {
  if (traj.times.empty()) throw std::invalid_argument("trajectory has no samples");
  const int n = traj.layout.n_agents;
  const int d = traj.layout.dim;
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  if (kkt.x_star.size() != nd) throw std::invalid_argument("oracle size mismatch");

  Eigen::VectorXd demand_total = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i)
    demand_total += kkt.x_star.segment(static_cast<Eigen::Index>(i) * d, d);

  RunMetrics m;
  m.times = traj.times;
  m.diverged = traj.diverged;
  const int ns = traj.n_samples();
  m.allocation_error.resize(ns);
  m.feasibility.resize(ns);
  m.multiplier_consensus.resize(ns);
  if (traj.layout.observer) {
    m.observer_gamma_error.resize(ns);
    m.observer_kappa_error.resize(ns);
  }

  for (int s = 0; s < ns; ++s) {
    const Eigen::VectorXd& y = traj.states[s];
    m.allocation_error[s] = (y.segment(0, nd) - kkt.x_star).norm();

    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) xsum += y.segment(static_cast<Eigen::Index>(i) * d, d);
    m.feasibility[s] = (xsum - demand_total).norm();

    double cons = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        cons = std::max(cons, (y.segment(nd + static_cast<Eigen::Index>(i) * d, d) -
                               y.segment(nd + static_cast<Eigen::Index>(j) * d, d))
                                  .norm());
    m.multiplier_consensus[s] = cons;

    if (!traj.layout.observer) continue;
    double ge = 0.0, ke = 0.0;
    const Eigen::VectorXd& kt = traj.kappa_true[s];
    for (int i = 0; i < n; ++i) {
      const Eigen::Index o = static_cast<Eigen::Index>(i) * d;
      double g2 = 0.0, k2 = 0.0;
      for (int blk = 0; blk < 3; ++blk) {
        g2 += (y.segment(blk * nd + o, d) - y.segment((3 + blk) * nd + o, d)).squaredNorm();
        k2 += (kt.segment(blk * nd + o, d) - y.segment((6 + blk) * nd + o, d)).squaredNorm();
      }
      ge = std::max(ge, std::sqrt(g2));
      ke = std::max(ke, std::sqrt(k2));
    }
    m.observer_gamma_error[s] = ge;
    m.observer_kappa_error[s] = ke;
  }

  const double horizon = traj.times.back() - traj.times.front();
  m.tail_window = window > 0.0 ? window : 0.25 * horizon;
  const double t0 = traj.times.back() - m.tail_window - 1e-12;
  auto tail_sup = [&](const std::vector<double>& v) {
    double sup = 0.0;
    for (int s = 0; s < ns; ++s)
      if (traj.times[s] >= t0) sup = std::max(sup, v[s]);
    return sup;
  };
  m.tail_allocation_error = tail_sup(m.allocation_error);
  m.tail_feasibility = tail_sup(m.feasibility);
  m.tail_multiplier_consensus = tail_sup(m.multiplier_consensus);
  if (traj.layout.observer) {
    m.tail_observer_gamma_error = tail_sup(m.observer_gamma_error);
    m.tail_observer_kappa_error = tail_sup(m.observer_kappa_error);
  }

  const double peak = *std::max_element(m.allocation_error.begin(), m.allocation_error.end());
  m.overshoot = std::max(0.0, peak - m.allocation_error.front());
  return m;
}

}  // namespace resalloc
