#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "reference.hpp"
#include "resalloc/attacks.hpp"
#include "resalloc/graph.hpp"

using resalloc::AgentView;
using resalloc::AttackSignal;
using resalloc::AttackSuite;
using resalloc::NetworkGraph;

namespace {

const Eigen::VectorXd kZero1 = Eigen::VectorXd::Zero(1);

AgentView dummy_view() { return AgentView{kZero1, kZero1, kZero1}; }

NetworkGraph line4() {
  return NetworkGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
}

resalloc::KappaAggregates kappas(const AttackSuite& suite, const NetworkGraph& g, double t) {
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(g.n_agents());
  return resalloc::kappa_aggregates(suite, g, t, zeros, zeros, zeros, 1);
}

}  // namespace

TEST_CASE("sinusoid evaluation") {
  const AttackSignal s = AttackSignal::sinusoid(0.1, 2.0);
  CHECK(s.eval(0.0, dummy_view(), 1)[0] == 0.1);
  CHECK(std::abs(s.eval(M_PI / 4.0, dummy_view(), 1)[0]) <= 1e-16);
  CHECK(AttackSignal::zero().eval(3.7, dummy_view(), 1)[0] == 0.0);
  CHECK(s.bound() == 0.1);

  double sup = 0.0;
  for (double t = 0.0; t <= 10.0; t += 1e-3)
    sup = std::max(sup, std::abs(s.eval(t, dummy_view(), 1)[0]));
  CHECK(sup <= 0.1 + 1e-12);
}

TEST_CASE("exosystem matches the sinusoid it encodes") {
  Eigen::MatrixXd S(2, 2);
  S << 0, 2, -2, 0;
  Eigen::MatrixXd C(1, 2);
  C << 1, 0;
  Eigen::VectorXd x0(2);
  x0 << 0.1, 0;
  const AttackSignal exo = AttackSignal::exosystem(S, C, x0, 0.1);
  const AttackSignal sin = AttackSignal::sinusoid(0.1, 2.0);
  for (double t : {0.0, 0.3, 1.7, 5.0})
    CHECK(std::abs(exo.eval(t, dummy_view(), 1)[0] - sin.eval(t, dummy_view(), 1)[0]) <= 1e-10);
  CHECK(exo.bound() == 0.1);

  Eigen::MatrixXd unstable(1, 1);
  unstable << 0.5;
  CHECK_THROWS_AS(AttackSignal::exosystem(unstable, Eigen::MatrixXd::Ones(1, 1),
                                          Eigen::VectorXd::Ones(1)),
                  std::invalid_argument);
}

TEST_CASE("state-dependent signals are clamped") {
  auto map = [](const AgentView& v) -> Eigen::VectorXd { return 0.5 * v.x; };
  const AttackSignal s = AttackSignal::state_dependent(map, 1.0);
  Eigen::VectorXd x(1), big(1), neg(1);
  x << 1.0;
  big << 4.0;
  neg << -4.0;
  CHECK(s.eval(0.0, AgentView{x, kZero1, kZero1}, 1)[0] == 0.5);
  CHECK(s.eval(0.0, AgentView{big, kZero1, kZero1}, 1)[0] == 1.0);
  CHECK(s.eval(0.0, AgentView{neg, kZero1, kZero1}, 1)[0] == -1.0);
  CHECK(s.bound() == 1.0);

  Eigen::VectorXd wrong(2);
  wrong << 1, 1;
  auto bad = [wrong](const AgentView&) -> Eigen::VectorXd { return wrong; };
  CHECK_THROWS_AS(AttackSignal::state_dependent(bad, 1.0).eval(0.0, dummy_view(), 1),
                  std::invalid_argument);
}

TEST_CASE("all-zero suite produces zero aggregates") {
  const auto k = kappas(AttackSuite(4), line4(), 1.3);
  CHECK(k.k1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.k2.cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.k3.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform sensor attacks sit in the laplacian kernel") {
  AttackSuite suite(4);
  for (int i = 0; i < 4; ++i) suite.set_lambda(i, AttackSignal::sinusoid(0.2, 2.0));
  for (double t : {0.0, 0.4, 2.9}) {
    const auto k = kappas(suite, line4(), t);
    CHECK(k.k2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(k.k3.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single-agent sensor attack on the line graph") {
  AttackSuite suite(4);
  suite.set_lambda(0, AttackSignal::sinusoid(0.2, 2.0));
  const auto k = kappas(suite, line4(), 0.0);
  Eigen::VectorXd k3(4), k2(4);
  k3 << 0.2, -0.2, 0, 0;
  k2 << -0.2, 0.2, 0, 0;
  CHECK((k.k3 - k3).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.k2 - k2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.k1.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("neighbors_only drops the agent's own sensor attack") {
  AttackSuite suite(4);
  suite.set_lambda(0, AttackSignal::sinusoid(0.2, 2.0));
  suite.set_neighbors_only(true);
  const auto k = kappas(suite, line4(), 0.0);
  Eigen::VectorXd k3(4);
  k3 << 0.0, -0.2, 0, 0;
  CHECK((k.k3 - k3).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.k2 + k3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregates sum to zero and match the dense laplacian") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const NetworkGraph g = testref::random_connected_graph(6, rng);
    AttackSuite suite(6);
    for (int i = 0; i < 6; ++i) {
      suite.set_actuator(i, AttackSignal::sinusoid(amp(rng), 2.0, amp(rng)));
      suite.set_lambda(i, AttackSignal::sinusoid(amp(rng), 1.0, amp(rng)));
      suite.set_z(i, AttackSignal::sinusoid(amp(rng), 3.0, amp(rng)));
    }
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(6);
    for (double t : {0.0, 0.7, 4.2}) {
      const auto k = resalloc::kappa_aggregates(suite, g, t, zeros, zeros, zeros, 1);
      CHECK(std::abs(k.k2.sum()) <= 1e-12);
      CHECK(std::abs(k.k3.sum()) <= 1e-12);

      // Dense cross-check: k3 = L lam_a, k2 = -L lam_a - L z_a.
      Eigen::VectorXd la(6), za(6);
      for (int i = 0; i < 6; ++i) {
        la[i] = suite.lambda(i).eval(t, dummy_view(), 1)[0];
        za[i] = suite.z(i).eval(t, dummy_view(), 1)[0];
      }
      const Eigen::MatrixXd L = g.laplacian();
      CHECK((k.k3 - L * la).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((k.k2 + L * la + L * za).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("aggregates are linear in the sensor signals") {
  std::mt19937 rng(42);
  const NetworkGraph g = testref::random_connected_graph(5, rng);
  AttackSuite suite(5);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  for (int i = 0; i < 5; ++i) {
    suite.set_lambda(i, AttackSignal::sinusoid(amp(rng), 2.0));
    suite.set_z(i, AttackSignal::sinusoid(amp(rng), 1.0));
  }
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(5);
  const auto base = resalloc::kappa_aggregates(suite, g, 0.6, zeros, zeros, zeros, 1);

  const auto doubled = resalloc::kappa_aggregates(suite.scaled(2.0), g, 0.6, zeros, zeros, zeros, 1);
  CHECK((doubled.k2 - 2.0 * base.k2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((doubled.k3 - 2.0 * base.k3).cwiseAbs().maxCoeff() == 0.0);

  const double a = 1.7;
  const auto scaled = resalloc::kappa_aggregates(suite.scaled(a), g, 0.6, zeros, zeros, zeros, 1);
  CHECK((scaled.k2 - a * base.k2).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((scaled.k3 - a * base.k3).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scaling preserves structure across signal kinds") {
  const AttackSignal s = AttackSignal::sinusoid(0.5, 2.0).scaled(3.0);
  CHECK(s.eval(0.0, dummy_view(), 1)[0] == 1.5);

  auto map = [](const AgentView& v) -> Eigen::VectorXd { return v.lambda; };
  const AttackSignal sd = AttackSignal::state_dependent(map, 2.0).scaled(2.0);
  Eigen::VectorXd lam(1);
  lam << 0.3;
  CHECK(sd.eval(0.0, AgentView{kZero1, lam, kZero1}, 1)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(sd.bound() == 4.0);
  CHECK(AttackSignal::sinusoid(1.0, 1.0).scaled(0.0).eval(0.2, dummy_view(), 1)[0] == 0.0);
}

TEST_CASE("parallel aggregation is bit-identical to serial") {
  std::mt19937 rng(43);
  const NetworkGraph g = testref::random_connected_graph(40, rng);
  AttackSuite suite(40);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  for (int i = 0; i < 40; ++i) {
    suite.set_actuator(i, AttackSignal::sinusoid(amp(rng), 2.0));
    suite.set_lambda(i, AttackSignal::sinusoid(amp(rng), 1.5));
    suite.set_z(i, AttackSignal::sinusoid(amp(rng), 0.5));
  }
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(40);
  const auto serial =
      resalloc::kappa_aggregates(suite, g, 1.1, zeros, zeros, zeros, 1, resalloc::Exec::Serial);
  const auto parallel =
      resalloc::kappa_aggregates(suite, g, 1.1, zeros, zeros, zeros, 1, resalloc::Exec::Parallel);
  CHECK((serial.k1 - parallel.k1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.k2 - parallel.k2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.k3 - parallel.k3).cwiseAbs().maxCoeff() == 0.0);
}
