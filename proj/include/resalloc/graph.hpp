#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace resalloc {

/// Execution policy for per-agent kernels. Serial is the reference
/// implementation; Parallel partitions agents across OpenMP threads and
/// produces bit-identical results (disjoint writes, fixed neighbor order).
enum class Exec { Serial, Parallel };

struct Edge {
  int i;
  int j;
  double weight;
};

/// Undirected weighted communication graph and its Laplacian
/// (l_ii = sum_j a_ij, l_ij = -a_ij). Immutable after construction;
/// safe to share across concurrent scenario runs.
class NetworkGraph {
 public:
  /// Throws std::invalid_argument naming the offending edge on self-loops,
  /// nonpositive weights, out-of-range indices, or duplicate edges.
  NetworkGraph(int n_agents, std::vector<Edge> edges);

  int n_agents() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Dense Laplacian, built on first use. Spectral diagnostics only; the
  /// kernels below walk the adjacency lists and never form it.
  const Eigen::MatrixXd& laplacian() const;

  /// Neighbors of agent i as (j, a_ij) pairs, sorted by j.
  const std::vector<std::pair<int, double>>& neighbors(int i) const {
    return adjacency_[i];
  }

  /// True iff every node is reachable from node 0.
  bool is_connected() const;

  /// Laplacian spectrum in ascending order, computed by cyclic Jacobi
  /// sweeps. Diagnostic only; not used by the algorithm right-hand sides.
  std::vector<double> eigenvalues() const;

  /// Second-smallest Laplacian eigenvalue rho_2 (0 for a single node).
  double algebraic_connectivity() const;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
  mutable Eigen::MatrixXd laplacian_;
  mutable bool laplacian_built_ = false;
};

/// out block i = sum_j a_ij (v_i - v_j), i.e. (L (x) I_d) v without forming
/// the Kronecker product. v holds n_agents stacked blocks of dimension d.
void laplacian_apply(const NetworkGraph& g, const Eigen::VectorXd& v, int d,
                     Eigen::VectorXd& out, Exec exec = Exec::Serial);

Eigen::VectorXd laplacian_apply(const NetworkGraph& g, const Eigen::VectorXd& v,
                                int d, Exec exec = Exec::Serial);

}  // namespace resalloc
