#include "resalloc/attacks.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace resalloc {

AttackSignal AttackSignal::sinusoid(double amplitude, double omega, double phase) {
  if (!std::isfinite(amplitude) || !std::isfinite(omega) || !std::isfinite(phase))
    throw std::invalid_argument("attack: sinusoid parameters must be finite");
  AttackSignal s;
  s.impl_ = Sinusoid{amplitude, omega, phase};
  return s;
}

AttackSignal AttackSignal::exosystem(Eigen::MatrixXd S, Eigen::MatrixXd C,
                                     Eigen::VectorXd x0, double bound) {
  if (S.rows() != S.cols())
    throw std::invalid_argument("attack: exosystem matrix S must be square");
  if (C.cols() != S.rows() || x0.size() != S.rows())
    throw std::invalid_argument("attack: exosystem C / x0 dimensions must match S");
  const Eigen::EigenSolver<Eigen::MatrixXd> es(S);
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (es.eigenvalues().real().cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument(
        "attack: exosystem S must be marginally stable (imaginary-axis eigenvalues)");
  AttackSignal s;
  s.impl_ = Exo{std::move(S), std::move(C), std::move(x0), bound};
  return s;
}

AttackSignal AttackSignal::state_dependent(
    std::function<Eigen::VectorXd(const AgentView&)> map, double s_max) {
  if (!map) throw std::invalid_argument("attack: state-dependent signal needs a map");
  if (!(s_max > 0.0) || !std::isfinite(s_max))
    throw std::invalid_argument("attack: saturation bound s_max must be positive and finite");
  AttackSignal s;
  s.impl_ = StateDep{std::move(map), s_max};
  return s;
}

double AttackSignal::bound() const {
  if (std::holds_alternative<Zero>(impl_)) return 0.0;
  if (const auto* s = std::get_if<Sinusoid>(&impl_)) return std::abs(s->amplitude);
  if (const auto* e = std::get_if<Exo>(&impl_)) return e->bound;
  return std::get<StateDep>(impl_).s_max;
}

Eigen::VectorXd AttackSignal::eval(double t, const AgentView& view, int dim) const {
  if (std::holds_alternative<Zero>(impl_)) return Eigen::VectorXd::Zero(dim);
  if (const auto* s = std::get_if<Sinusoid>(&impl_))
    return Eigen::VectorXd::Constant(dim, s->amplitude * std::cos(s->omega * t + s->phase));
  if (const auto* e = std::get_if<Exo>(&impl_)) {
    const Eigen::VectorXd out = e->C * (e->S * t).exp() * e->x0;
    if (out.size() == dim) return out;
    if (out.size() == 1) return Eigen::VectorXd::Constant(dim, out[0]);
    throw std::invalid_argument("attack: exosystem output dimension mismatch");
  }
  const auto& sd = std::get<StateDep>(impl_);
  Eigen::VectorXd out = sd.map(view);
  if (out.size() != dim)
    throw std::invalid_argument("attack: state-dependent map returned wrong dimension");
  return out.cwiseMax(-sd.s_max).cwiseMin(sd.s_max);
}

AttackSignal AttackSignal::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor))
    throw std::invalid_argument("attack: scale factor must be finite and nonnegative");
  AttackSignal out = *this;
  if (auto* s = std::get_if<Sinusoid>(&out.impl_)) {
    s->amplitude *= factor;
  } else if (auto* e = std::get_if<Exo>(&out.impl_)) {
    e->x0 *= factor;
    e->bound *= factor;
  } else if (auto* sd = std::get_if<StateDep>(&out.impl_)) {
    if (factor == 0.0) return AttackSignal::zero();
    auto inner = sd->map;
    sd->map = [inner, factor](const AgentView& v) -> Eigen::VectorXd {
      return factor * inner(v);
    };
    sd->s_max *= factor;
  }
  return out;
}

AttackSuite::AttackSuite(int n_agents) {
  if (n_agents <= 0) throw std::invalid_argument("attack: suite needs at least one agent");
  actuator_.resize(n_agents);
  lambda_.resize(n_agents);
  z_.resize(n_agents);
}

bool AttackSuite::all_zero() const {
  for (int i = 0; i < n_agents(); ++i)
    if (!actuator_[i].is_zero() || !lambda_[i].is_zero() || !z_[i].is_zero()) return false;
  return true;
}

AttackSuite AttackSuite::scaled(double factor) const {
  AttackSuite out(n_agents());
  out.neighbors_only_ = neighbors_only_;
  for (int i = 0; i < n_agents(); ++i) {
    out.actuator_[i] = actuator_[i].scaled(factor);
    out.lambda_[i] = lambda_[i].scaled(factor);
    out.z_[i] = z_[i].scaled(factor);
  }
  return out;
}

KappaAggregates kappa_aggregates(const AttackSuite& suite, const NetworkGraph& g,
                                 double t, const Eigen::VectorXd& X,
                                 const Eigen::VectorXd& Lam, const Eigen::VectorXd& Z,
                                 int dim, Exec exec) {
  const int n = g.n_agents();
  if (suite.n_agents() != n)
    throw std::invalid_argument("kappa_aggregates: suite/graph agent count mismatch");
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * dim;
  if (dim <= 0 || X.size() != nd || Lam.size() != nd || Z.size() != nd)
    throw std::invalid_argument("kappa_aggregates: state vectors must stack n_agents blocks");

  KappaAggregates k;
  k.k1.resize(nd);
  k.k2.resize(nd);
  k.k3.resize(nd);
  Eigen::VectorXd la(nd), za(nd), zagg(nd);

  auto eval_agent = [&](int i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * dim;
    const AgentView view{X.segment(o, dim), Lam.segment(o, dim), Z.segment(o, dim)};
    k.k1.segment(o, dim) = suite.actuator(i).eval(t, view, dim);
    la.segment(o, dim) = suite.lambda(i).eval(t, view, dim);
    za.segment(o, dim) = suite.z(i).eval(t, view, dim);
  };
  auto aggregate = [&](int i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * dim;
    auto k3i = k.k3.segment(o, dim);
    auto zi = zagg.segment(o, dim);
    k3i.setZero();
    zi.setZero();
    const Eigen::VectorXd own_la =
        suite.neighbors_only() ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd(la.segment(o, dim));
    const Eigen::VectorXd own_za =
        suite.neighbors_only() ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd(za.segment(o, dim));
    for (const auto& [j, w] : g.neighbors(i)) {
      const Eigen::Index jo = static_cast<Eigen::Index>(j) * dim;
      k3i += w * (own_la - la.segment(jo, dim));
      zi += w * (own_za - za.segment(jo, dim));
    }
  };

#ifdef _OPENMP
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) eval_agent(i);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) aggregate(i);
    k.k2 = -k.k3 - zagg;
    return k;
  }
#else
  (void)exec;
#endif
  for (int i = 0; i < n; ++i) eval_agent(i);
  for (int i = 0; i < n; ++i) aggregate(i);
  k.k2 = -k.k3 - zagg;
  return k;
}

}  // namespace resalloc
