#include "resalloc/problem.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace resalloc {

CostFunction::CostFunction(const Quadratic& q) : impl_(q) {
  if (!(q.c > 0.0) || !std::isfinite(q.a) || !std::isfinite(q.b) || !std::isfinite(q.c))
    throw std::invalid_argument("cost: quadratic coefficient c must be positive and finite");
}

CostFunction::CostFunction(GeneralConvex gc) : impl_(std::move(gc)) {
  const auto& g = std::get<GeneralConvex>(impl_);
  if (!g.gradient)
    throw std::invalid_argument("cost: general convex cost needs a gradient");
  if (!(g.modulus > 0.0))
    throw std::invalid_argument("cost: strong-convexity modulus must be positive");
}

Eigen::VectorXd CostFunction::gradient(const Eigen::VectorXd& x) const {
  if (const auto* q = std::get_if<Quadratic>(&impl_))
    return (q->b + 2.0 * q->c * x.array()).matrix();
  const auto& g = std::get<GeneralConvex>(impl_);
  Eigen::VectorXd out = g.gradient(x);
  if (out.size() != x.size())
    throw std::invalid_argument("cost: declared gradient returned wrong dimension");
  return out;
}

AllocationProblem::AllocationProblem(std::vector<CostFunction> costs,
                                     std::vector<Eigen::VectorXd> demands,
                                     std::vector<DriftFn> drifts, int decision_dim)
    : costs_(std::move(costs)),
      demands_(std::move(demands)),
      drifts_(std::move(drifts)),
      dim_(decision_dim) {
  if (costs_.empty()) throw std::invalid_argument("problem: needs at least one agent");
  if (dim_ <= 0) throw std::invalid_argument("problem: decision_dim must be positive");
  if (demands_.size() != costs_.size())
    throw std::invalid_argument("problem: one demand vector per agent");
  if (!drifts_.empty() && drifts_.size() != costs_.size())
    throw std::invalid_argument("problem: drifts must be empty or one per agent");
  total_demand_ = Eigen::VectorXd::Zero(dim_);
  for (const auto& d : demands_) {
    if (d.size() != dim_)
      throw std::invalid_argument("problem: demand dimension mismatch");
    total_demand_ += d;
  }
  if (!total_demand_.allFinite())
    throw std::invalid_argument("problem: total demand must be finite");
}

Eigen::VectorXd AllocationProblem::drift(int i, const Eigen::VectorXd& x) const {
  if (!has_drift(i)) return Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd out = drifts_[i](x);
  if (out.size() != x.size())
    throw std::invalid_argument("problem: drift returned wrong dimension");
  return out;
}

namespace {

// Component k of grad f at s*e_k; costs are assumed separable, so this is the
// scalar gradient of the k-th coordinate.
double gradient_component(const CostFunction& f, int dim, int k, double s) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  x[k] = s;
  return f.gradient(x)[k];
}

// Inverts the (strictly increasing) scalar gradient: find s with
// grad_k(s) = mu, by doubling bracket expansion then bisection.
double invert_gradient(const CostFunction& f, int dim, int k, double mu) {
  double lo = -1.0;
  double hi = 1.0;
  for (int guard = 0; gradient_component(f, dim, k, lo) > mu; ++guard) {
    lo *= 2.0;
    if (guard > 60)
      throw std::runtime_error("solve_kkt: gradient inversion bracket exhausted (low side)");
  }
  for (int guard = 0; gradient_component(f, dim, k, hi) < mu; ++guard) {
    hi *= 2.0;
    if (guard > 60)
      throw std::runtime_error("solve_kkt: gradient inversion bracket exhausted (high side)");
  }
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (gradient_component(f, dim, k, mid) < mu)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

KktSolution solve_closed_form(const AllocationProblem& p) {
  const int n = p.n_agents();
  const int dim = p.decision_dim();
  double sum_inv = 0.0;
  double sum_bc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Quadratic& q = p.cost(i).quadratic();
    sum_inv += 1.0 / (2.0 * q.c);
    sum_bc += q.b / (2.0 * q.c);
  }
  KktSolution sol;
  sol.mu = (p.total_demand().array() + sum_bc) / sum_inv;
  sol.lambda_star = -sol.mu;
  sol.x_star.resize(static_cast<Eigen::Index>(n) * dim);
  for (int i = 0; i < n; ++i) {
    const Quadratic& q = p.cost(i).quadratic();
    sol.x_star.segment(static_cast<Eigen::Index>(i) * dim, dim) =
        (sol.mu.array() - q.b) / (2.0 * q.c);
  }
  return sol;
}

KktSolution solve_bisection(const AllocationProblem& p, const KktOptions& opt) {
  const int n = p.n_agents();
  const int dim = p.decision_dim();
  KktSolution sol;
  sol.mu.resize(dim);
  sol.x_star.resize(static_cast<Eigen::Index>(n) * dim);
  for (int k = 0; k < dim; ++k) {
    const double target = p.total_demand()[k];
    auto residual = [&](double mu) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += invert_gradient(p.cost(i), dim, k, mu);
      return total - target;
    };
    double lo = opt.mu_lo;
    double hi = opt.mu_hi;
    const double rlo = residual(lo);
    const double rhi = residual(hi);
    if (rlo > 0.0 || rhi < 0.0) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "solve_kkt: mu bracket [%g, %g] does not enclose the solution for "
                    "component %d (residuals %g, %g)",
                    lo, hi, k, rlo, rhi);
      throw std::runtime_error(buf);
    }
    double mid = 0.5 * (lo + hi);
    double res = residual(mid);
    for (int it = 0; it < opt.max_iter && std::abs(res) > opt.tol; ++it) {
      if (res < 0.0)
        lo = mid;
      else
        hi = mid;
      const double next = 0.5 * (lo + hi);
      if (next == mid) break;
      mid = next;
      res = residual(mid);
    }
    if (std::abs(res) > opt.tol) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "solve_kkt: bisection stalled at residual %g for component %d", res, k);
      throw std::runtime_error(buf);
    }
    sol.mu[k] = mid;
    for (int i = 0; i < n; ++i)
      sol.x_star[static_cast<Eigen::Index>(i) * dim + k] = invert_gradient(p.cost(i), dim, k, mid);
  }
  sol.lambda_star = -sol.mu;
  return sol;
}

}  // namespace

KktSolution solve_kkt(const AllocationProblem& p, const KktOptions& opt) {
  bool all_quadratic = true;
  for (int i = 0; i < p.n_agents(); ++i)
    if (!p.cost(i).is_quadratic()) all_quadratic = false;
  if (all_quadratic && !opt.force_bisection) return solve_closed_form(p);
  return solve_bisection(p, opt);
}

Eigen::VectorXd feasibility_residual(const Eigen::VectorXd& X, const AllocationProblem& p) {
  const int dim = p.decision_dim();
  if (X.size() != static_cast<Eigen::Index>(p.n_agents()) * dim)
    throw std::invalid_argument("feasibility_residual: X must stack n_agents decision blocks");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < p.n_agents(); ++i)
    total += X.segment(static_cast<Eigen::Index>(i) * dim, dim);
  return total - p.total_demand();
}

}  // namespace resalloc
