#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "reference.hpp"
#include "resalloc/algorithms.hpp"

using resalloc::AttackSignal;
using resalloc::AttackSuite;
using resalloc::EsoConfig;
using resalloc::HSpec;
using resalloc::NetworkGraph;

namespace {

NetworkGraph line4() {
  return NetworkGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
}

AttackSuite weak_suite() {
  AttackSuite suite(4);
  for (int i = 0; i < 4; ++i) {
    suite.set_actuator(i, AttackSignal::sinusoid(0.1, 2.0));
    suite.set_lambda(i, AttackSignal::sinusoid(0.2, 2.0));
    suite.set_z(i, AttackSignal::sinusoid(0.1, 2.0));
  }
  return suite;
}

}  // namespace

TEST_CASE("fal values") {
  CHECK(resalloc::fal(1.0, 0.125, 0.5) == 1.0);
  CHECK(resalloc::fal(0.2, 0.125, 0.5) ==
        doctest::Approx(0.36680161728186847).epsilon(1e-15));
  CHECK(resalloc::fal(-2.0, 0.5, 0.5) ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  CHECK(resalloc::fal(0.0, 0.125, 0.5) == 0.0);
}

TEST_CASE("fal is odd, continuous and monotone") {
  for (double e : {0.01, 0.3, 0.5, 0.9, 4.0})
    CHECK(resalloc::fal(-e, 0.125, 0.5) == -resalloc::fal(e, 0.125, 0.5));

  // Both branches meet at delta^alpha.
  const double at_delta = std::pow(0.5, 0.125);
  CHECK(resalloc::fal(0.5, 0.125, 0.5) == doctest::Approx(at_delta).epsilon(1e-14));
  CHECK(std::abs(resalloc::fal(0.5 + 1e-12, 0.125, 0.5) -
                 resalloc::fal(0.5 - 1e-12, 0.125, 0.5)) <= 1e-9);

  double prev = resalloc::fal(-3.0, 0.125, 0.5);
  for (double e = -3.0 + 1e-3; e <= 3.0; e += 1e-3) {
    const double cur = resalloc::fal(e, 0.125, 0.5);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("componentwise fal and HSpec shapes") {
  Eigen::VectorXd e(3);
  e << 0.2, -2.0, 0.0;
  const Eigen::VectorXd v = resalloc::fal(e, 0.125, 0.5);
  CHECK(v[0] == doctest::Approx(0.36680161728186847).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(-std::pow(2.0, 0.125)).epsilon(1e-15));
  CHECK(v[2] == 0.0);

  const HSpec identity{HSpec::Kind::Identity, 0.125, 0.5};
  CHECK((identity(e) - e).cwiseAbs().maxCoeff() == 0.0);
  const HSpec shaped{HSpec::Kind::Fal, 0.125, 0.5};
  CHECK((shaped(e) - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eso config validation") {
  EsoConfig cfg;
  cfg.validate();
  cfg.w0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.w0 = 50.0;
  cfg.a1 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EsoConfig{};
  cfg.variant = EsoConfig::Variant::Nonlinear;
  cfg.h2 = HSpec{HSpec::Kind::Fal, 1.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.h2 = HSpec{HSpec::Kind::Fal, 0.125, 0.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("observer corrections at hand-checked points") {
  EsoConfig lin;
  lin.variant = EsoConfig::Variant::Linear;
  lin.w0 = 50.0;
  Eigen::VectorXd gamma_hat(1), kappa_hat(1), gamma(1), u_io(1), gdot(1), kdot(1);

  // Zero innovation: gamma_hat' = kappa_hat + u_io, kappa_hat' = 0.
  gamma_hat << 0.7;
  kappa_hat << -1.3;
  gamma << 0.7;
  u_io << 2.0;
  resalloc::observer_rhs(gamma_hat, kappa_hat, gamma, u_io, lin, gdot, kdot);
  CHECK(gdot[0] == 0.7);
  CHECK(kdot[0] == 0.0);

  // e = 0.01 at w0 = 50: corrections 2*50*0.01 = 1 and 50^2*0.01 = 25.
  gamma << 0.71;
  u_io << 0.0;
  kappa_hat << 0.0;
  resalloc::observer_rhs(gamma_hat, kappa_hat, gamma, u_io, lin, gdot, kdot);
  CHECK(gdot[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kdot[0] == doctest::Approx(25.0).epsilon(1e-12));

  EsoConfig nl;
  nl.variant = EsoConfig::Variant::Nonlinear;
  nl.w0 = 50.0;
  gamma << 0.9;  // e = 0.2
  resalloc::observer_rhs(gamma_hat, kappa_hat, gamma, u_io, nl, gdot, kdot);
  CHECK(gdot[0] == doctest::Approx(50.0 * 0.2).epsilon(1e-12));
  CHECK(kdot[0] == doctest::Approx(917.0040432046712).epsilon(1e-12));
}

TEST_CASE("nominal rhs vanishes at the equilibrium and only there") {
  const auto p = testref::four_gen_problem();
  const NetworkGraph g = line4();
  const auto kkt = resalloc::solve_kkt(p);
  const Eigen::VectorXd eq = resalloc::equilibrium_state(p, g, kkt);

  Eigen::VectorXd dy;
  resalloc::nominal_rhs(eq, p, g, dy);
  CHECK(dy.cwiseAbs().maxCoeff() <= 1e-9);

  Eigen::VectorXd perturbed = eq;
  perturbed[2] += 0.05;
  resalloc::nominal_rhs(perturbed, p, g, dy);
  CHECK(dy.cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("minimum-norm auxiliary equilibrium of the dispatch testbed") {
  const auto p = testref::four_gen_problem();
  const NetworkGraph g = line4();
  const Eigen::VectorXd eq = resalloc::equilibrium_state(p, g, resalloc::solve_kkt(p));
  Eigen::VectorXd z_expected(4);
  z_expected << -15.235, -2.895, 14.625, 3.505;
  CHECK((eq.segment(8, 4) - z_expected).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(eq.segment(8, 4).sum()) <= 1e-9);
  CHECK((eq.segment(4, 4).array() + 73.64).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("two-agent equilibrium by hand") {
  std::vector<resalloc::CostFunction> costs{resalloc::Quadratic{0, 0, 1},
                                            resalloc::Quadratic{0, 0, 1}};
  std::vector<Eigen::VectorXd> demands{Eigen::VectorXd::Constant(1, 1.0),
                                       Eigen::VectorXd::Constant(1, 1.0)};
  const resalloc::AllocationProblem p(std::move(costs), std::move(demands));
  const NetworkGraph g(2, {{0, 1, 1.0}});
  Eigen::VectorXd y(6);
  y << 1, 1, -2, -2, 0, 0;
  Eigen::VectorXd dy;
  resalloc::nominal_rhs(y, p, g, dy);
  CHECK(dy.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initial decision derivative of the dispatch testbed") {
  const auto p = testref::four_gen_problem();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(12);
  y.segment(0, 4) = testref::four_gen_x0();
  Eigen::VectorXd dy;
  resalloc::nominal_rhs(y, p, line4(), dy);
  CHECK(dy[0] == -163.0);
}

TEST_CASE("nominal rhs agrees with the dense compact form") {
  std::mt19937 rng(51);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + trial % 5;
    const int d = 1 + trial % 3;
    const NetworkGraph g = testref::random_connected_graph(n, rng);
    const auto p = testref::random_quadratic_problem(n, d, rng);
    const Eigen::VectorXd y = testref::random_vector(3 * n * d, rng);
    Eigen::VectorXd dy;
    resalloc::nominal_rhs(y, p, g, dy);
    const Eigen::VectorXd expected = testref::dense_nominal_rhs(y, p, g.laplacian());
    CHECK((dy - expected).cwiseAbs().maxCoeff() <= 1e-12);

    // d/dt sum lam_i = sum (x_i - d_i).
    Eigen::VectorXd lam_sum = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) lam_sum += dy.segment((n + i) * d, d);
    const Eigen::VectorXd resid =
        resalloc::feasibility_residual(y.segment(0, n * d), p);
    CHECK((lam_sum - resid).cwiseAbs().maxCoeff() <= 1e-12);

    // d/dt sum z_i = 0.
    Eigen::VectorXd z_sum = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) z_sum += dy.segment((2 * n + i) * d, d);
    CHECK(z_sum.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("compromised rhs reduces to nominal without attacks") {
  std::mt19937 rng(52);
  const auto p = testref::four_gen_problem();
  const NetworkGraph g = line4();
  const Eigen::VectorXd y = testref::random_vector(12, rng);
  Eigen::VectorXd nom, comp;
  resalloc::nominal_rhs(y, p, g, nom);
  resalloc::compromised_rhs(y, 1.7, p, g, AttackSuite(4), comp);
  CHECK((nom - comp).cwiseAbs().maxCoeff() == 0.0);

  // A uniform sensor attack with no actuator channel is invisible.
  AttackSuite uniform(4);
  for (int i = 0; i < 4; ++i) uniform.set_lambda(i, AttackSignal::sinusoid(0.2, 2.0));
  resalloc::compromised_rhs(y, 1.7, p, g, uniform, comp);
  CHECK((nom - comp).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weak actuator attack shifts the decision derivative by its value") {
  std::mt19937 rng(53);
  const auto p = testref::four_gen_problem();
  const NetworkGraph g = line4();
  const Eigen::VectorXd y = testref::random_vector(12, rng);
  Eigen::VectorXd nom, comp;
  resalloc::nominal_rhs(y, p, g, nom);
  resalloc::compromised_rhs(y, 0.0, p, g, weak_suite(), comp);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(comp[i] - nom[i] - 0.1) <= 1e-12);  // u_i^a(0) = 0.1
  // Uniform sensor attacks cancel in the relative terms.
  CHECK((comp - nom).segment(4, 8).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("oracle-fed disturbance estimates cancel exactly") {
  std::mt19937 rng(54);
  const auto p = testref::four_gen_problem(true);  // unknown drift g = sin
  const NetworkGraph g = line4();
  AttackSuite suite = weak_suite();
  const double t = 0.37;

  Eigen::VectorXd y(36);
  const Eigen::VectorXd plant = testref::random_vector(12, rng);
  y.segment(0, 12) = plant;
  y.segment(12, 12) = plant;  // gamma_hat = gamma
  const auto kappa = resalloc::kappa_aggregates(suite, g, t, plant.segment(0, 4),
                                                plant.segment(4, 4), plant.segment(8, 4), 1);
  for (int i = 0; i < 4; ++i) {
    y[24 + i] = kappa.k1[i] + std::sin(plant[i]);  // lumped kappa_1 + g
    y[28 + i] = kappa.k2[i];
    y[32 + i] = kappa.k3[i];
  }

  EsoConfig cfg;
  cfg.w0 = 50.0;
  Eigen::VectorXd dy, nom;
  resalloc::resilient_rhs(y, t, p, g, suite, cfg, dy);
  resalloc::nominal_rhs(plant, testref::four_gen_problem(), g, nom);
  CHECK((dy.segment(0, 12) - nom).cwiseAbs().maxCoeff() <= 1e-12);
  // Perfect estimates: zero innovation, observer tracks the plant derivative.
  CHECK(dy.segment(24, 12).cwiseAbs().maxCoeff() == 0.0);
  CHECK((dy.segment(12, 12) - dy.segment(0, 12)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("resilient loop with no attacks, no drift and exact initialization") {
  std::mt19937 rng(55);
  const auto p = testref::four_gen_problem();
  const NetworkGraph g = line4();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(36);
  const Eigen::VectorXd plant = testref::random_vector(12, rng);
  y.segment(0, 12) = plant;
  y.segment(12, 12) = plant;

  EsoConfig cfg;
  cfg.w0 = 50.0;
  Eigen::VectorXd dy, nom;
  resalloc::resilient_rhs(y, 0.0, p, g, AttackSuite(4), cfg, dy);
  resalloc::nominal_rhs(plant, p, g, nom);
  CHECK((dy.segment(0, 12) - nom).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dy.segment(24, 12).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a huge clamp leaves the resilient rhs untouched") {
  std::mt19937 rng(56);
  const auto p = testref::four_gen_problem(true);
  const NetworkGraph g = line4();
  const Eigen::VectorXd y = testref::random_vector(36, rng);
  EsoConfig cfg;
  cfg.w0 = 50.0;
  Eigen::VectorXd raw, clamped;
  resalloc::resilient_rhs(y, 0.9, p, g, weak_suite(), cfg, raw);
  cfg.kappa_hat_clamp = 1e12;
  resalloc::resilient_rhs(y, 0.9, p, g, weak_suite(), cfg, clamped);
  CHECK((raw - clamped).cwiseAbs().maxCoeff() == 0.0);

  // A tight clamp saturates the fed-back estimate.
  cfg.kappa_hat_clamp = 1e-3;
  Eigen::VectorXd tight;
  resalloc::resilient_rhs(y, 0.9, p, g, weak_suite(), cfg, tight);
  CHECK((raw - tight).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("parallel rhs evaluation is bit-identical to serial") {
  std::mt19937 rng(57);
  const NetworkGraph g = testref::random_connected_graph(32, rng);
  const auto p = testref::random_quadratic_problem(32, 1, rng);
  AttackSuite suite(32);
  for (int i = 0; i < 32; ++i) suite.set_lambda(i, AttackSignal::sinusoid(0.5 + 0.01 * i, 2.0));

  const Eigen::VectorXd y3 = testref::random_vector(96, rng);
  Eigen::VectorXd a, b;
  resalloc::compromised_rhs(y3, 0.8, p, g, suite, a, resalloc::Exec::Serial);
  resalloc::compromised_rhs(y3, 0.8, p, g, suite, b, resalloc::Exec::Parallel);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd y9 = testref::random_vector(288, rng);
  EsoConfig cfg;
  cfg.w0 = 50.0;
  resalloc::resilient_rhs(y9, 0.8, p, g, suite, cfg, a, resalloc::Exec::Serial);
  resalloc::resilient_rhs(y9, 0.8, p, g, suite, cfg, b, resalloc::Exec::Parallel);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear observer converges on a frozen constant disturbance") {
  // Plant: gamma' = kappa (constant), u_io = 0; observer should drive both
  // estimation errors to zero, faster for larger w0.
  auto observe = [](double w0, double t_end) {
    EsoConfig cfg;
    cfg.w0 = w0;
    const double kappa = 3.0;
    Eigen::VectorXd gamma(1), gamma_hat(1), kappa_hat(1);
    gamma << 0.0;
    gamma_hat << 0.0;
    kappa_hat << 0.0;
    const double dt = 1e-4;
    const int steps = static_cast<int>(t_end / dt);
    Eigen::VectorXd u_io = Eigen::VectorXd::Zero(1);
    for (int k = 0; k < steps; ++k) {
      // RK4 on the coupled (gamma, gamma_hat, kappa_hat) system.
      auto deriv = [&](const Eigen::Vector3d& s) {
        Eigen::VectorXd gh(1), kh(1), gm(1), gd(1), kd(1);
        gm << s[0];
        gh << s[1];
        kh << s[2];
        resalloc::observer_rhs(gh, kh, gm, u_io, cfg, gd, kd);
        return Eigen::Vector3d(kappa, gd[0], kd[0]);
      };
      Eigen::Vector3d s(gamma[0], gamma_hat[0], kappa_hat[0]);
      const Eigen::Vector3d k1 = deriv(s);
      const Eigen::Vector3d k2 = deriv(s + 0.5 * dt * k1);
      const Eigen::Vector3d k3 = deriv(s + 0.5 * dt * k2);
      const Eigen::Vector3d k4 = deriv(s + dt * k3);
      s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      gamma << s[0];
      gamma_hat << s[1];
      kappa_hat << s[2];
    }
    return std::pair<double, double>(std::abs(gamma[0] - gamma_hat[0]),
                                     std::abs(kappa_hat[0] - kappa));
  };
  const auto [ge20, ke20] = observe(20.0, 1.0);
  CHECK(ge20 <= 1e-6);
  CHECK(ke20 <= 1e-4);
  const auto [ge40, ke40] = observe(40.0, 1.0);
  CHECK(ge40 < ge20);
  CHECK(ke40 < ke20);
}
