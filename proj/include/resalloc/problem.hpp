#pragma once

#include <Eigen/Dense>
#include <functional>
#include <variant>
#include <vector>

namespace resalloc {

/// a + b x + c x^2, applied componentwise; strongly convex iff c > 0.
struct Quadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
};

/// Cost known only through its declared gradient, with declared
/// strong-convexity modulus m and gradient Lipschitz constant l.
/// The KKT oracle assumes the cost is separable across components.
struct GeneralConvex {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double modulus = 0.0;
  double lipschitz = 0.0;
};

class CostFunction {
 public:
  CostFunction(const Quadratic& q);  // requires c > 0
  CostFunction(GeneralConvex gc);    // requires modulus > 0 and a gradient

  bool is_quadratic() const { return std::holds_alternative<Quadratic>(impl_); }
  const Quadratic& quadratic() const { return std::get<Quadratic>(impl_); }
  const GeneralConvex& general() const { return std::get<GeneralConvex>(impl_); }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

 private:
  std::variant<Quadratic, GeneralConvex> impl_;
};

/// Per-agent plant drift g_i; an empty function means zero drift.
using DriftFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

class AllocationProblem {
 public:
  AllocationProblem(std::vector<CostFunction> costs,
                    std::vector<Eigen::VectorXd> demands,
                    std::vector<DriftFn> drifts = {}, int decision_dim = 1);

  int n_agents() const { return static_cast<int>(costs_.size()); }
  int decision_dim() const { return dim_; }
  const CostFunction& cost(int i) const { return costs_[i]; }
  const Eigen::VectorXd& demand(int i) const { return demands_[i]; }
  const Eigen::VectorXd& total_demand() const { return total_demand_; }

  bool has_drift(int i) const { return !drifts_.empty() && bool(drifts_[i]); }
  Eigen::VectorXd drift(int i, const Eigen::VectorXd& x) const;

 private:
  std::vector<CostFunction> costs_;
  std::vector<Eigen::VectorXd> demands_;
  std::vector<DriftFn> drifts_;
  int dim_;
  Eigen::VectorXd total_demand_;
};

struct KktSolution {
  Eigen::VectorXd x_star;       // stacked, n_agents blocks of decision_dim
  Eigen::VectorXd lambda_star;  // decision_dim; lambda_star = -mu
  Eigen::VectorXd mu;           // common gradient value at the optimum
};

struct KktOptions {
  double mu_lo = -1e6;
  double mu_hi = 1e6;
  double tol = 1e-10;  // on the feasibility residual
  int max_iter = 200;
  bool force_bisection = false;  // bypass the quadratic closed form
};

/// Solves grad f_i(x_i*) + lambda* = 0, sum x_i* = sum d_i. All-quadratic
/// problems use the closed form mu = (sum d + sum b_i/2c_i) / (sum 1/2c_i)
/// componentwise; otherwise componentwise monotone bisection on mu with inner
/// gradient inversion. Throws std::runtime_error with diagnostics when the
/// mu bracket does not enclose a solution.
KktSolution solve_kkt(const AllocationProblem& p, const KktOptions& opt = {});

/// sum_i x_i - sum_i d_i.
Eigen::VectorXd feasibility_residual(const Eigen::VectorXd& X,
                                     const AllocationProblem& p);

}  // namespace resalloc
