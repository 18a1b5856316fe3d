#include "resalloc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <string>

namespace resalloc {

namespace {

std::string edge_repr(const Edge& e) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "(%d, %d, %g)", e.i, e.j, e.weight);
  return std::string(buf);
}

}  // namespace

NetworkGraph::NetworkGraph(int n_agents, std::vector<Edge> edges)
    : n_(n_agents), edges_(std::move(edges)) {
  if (n_ <= 0) throw std::invalid_argument("graph: n_agents must be positive");
  adjacency_.resize(n_);
  for (const Edge& e : edges_) {
    if (e.i < 0 || e.i >= n_ || e.j < 0 || e.j >= n_)
      throw std::invalid_argument("graph: index out of range in edge " + edge_repr(e));
    if (e.i == e.j)
      throw std::invalid_argument("graph: self-loop in edge " + edge_repr(e));
    if (!(e.weight > 0.0))
      throw std::invalid_argument("graph: nonpositive weight in edge " + edge_repr(e));
    for (const auto& [j, w] : adjacency_[e.i]) {
      (void)w;
      if (j == e.j)
        throw std::invalid_argument("graph: duplicate edge " + edge_repr(e));
    }
    adjacency_[e.i].emplace_back(e.j, e.weight);
    adjacency_[e.j].emplace_back(e.i, e.weight);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

const Eigen::MatrixXd& NetworkGraph::laplacian() const {
  static std::mutex build_mutex;
  std::lock_guard<std::mutex> lock(build_mutex);
  if (!laplacian_built_) {
    laplacian_ = Eigen::MatrixXd::Zero(n_, n_);
    for (const Edge& e : edges_) {
      laplacian_(e.i, e.j) = -e.weight;
      laplacian_(e.j, e.i) = -e.weight;
      laplacian_(e.i, e.i) += e.weight;
      laplacian_(e.j, e.j) += e.weight;
    }
    laplacian_built_ = true;
  }
  return laplacian_;
}

bool NetworkGraph::is_connected() const {
  std::vector<char> seen(n_, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& [v, w] : adjacency_[u]) {
      (void)w;
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n_;
}

std::vector<double> NetworkGraph::eigenvalues() const {
  Eigen::MatrixXd a = laplacian();
  const int n = n_;
  const double scale = std::max(1.0, a.squaredNorm());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-26 * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        // Jacobi rotation zeroing a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t =
            std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double NetworkGraph::algebraic_connectivity() const {
  if (n_ < 2) return 0.0;
  return eigenvalues()[1];
}

void laplacian_apply(const NetworkGraph& g, const Eigen::VectorXd& v, int d,
                     Eigen::VectorXd& out, Exec exec) {
  const int n = g.n_agents();
  if (d <= 0 || v.size() != static_cast<Eigen::Index>(n) * d)
    throw std::invalid_argument("laplacian_apply: v must stack n_agents blocks of dimension d");
  out.resize(v.size());
  auto row = [&](int i) {
    auto oi = out.segment(static_cast<Eigen::Index>(i) * d, d);
    oi.setZero();
    const auto vi = v.segment(static_cast<Eigen::Index>(i) * d, d);
    for (const auto& [j, w] : g.neighbors(i))
      oi += w * (vi - v.segment(static_cast<Eigen::Index>(j) * d, d));
  };
#ifdef _OPENMP
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) row(i);
    return;
  }
#else
  (void)exec;
#endif
  for (int i = 0; i < n; ++i) row(i);
}

Eigen::VectorXd laplacian_apply(const NetworkGraph& g, const Eigen::VectorXd& v,
                                int d, Exec exec) {
  Eigen::VectorXd out;
  laplacian_apply(g, v, d, out, exec);
  return out;
}

}  // namespace resalloc
