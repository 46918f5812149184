#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/rng.hpp"

namespace dtd {

/// Undirected communication graph; self-loops are implicit and never stored.
class Graph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Graph(std::size_t num_nodes, std::vector<Edge> edges) : n_(num_nodes), adjacency_(num_nodes) {
    if (num_nodes < 1) throw ConfigError("Graph: need at least one node");
    for (auto [a, b] : edges) {
      if (a >= n_ || b >= n_) throw ConfigError("Graph: edge endpoint out of range");
      if (a == b) throw ConfigError("Graph: explicit self-loop " + std::to_string(a));
      const Edge e{std::min(a, b), std::max(a, b)};
      if (std::find(edges_.begin(), edges_.end(), e) != edges_.end()) {
        throw ConfigError("Graph: duplicate edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
      }
      edges_.push_back(e);
      adjacency_[e.first].push_back(e.second);
      adjacency_[e.second].push_back(e.first);
    }
    std::sort(edges_.begin(), edges_.end());
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  std::size_t num_nodes() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }

  bool has_edge(std::size_t a, std::size_t b) const {
    const auto& nbrs = adjacency_[a];
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
  }

  bool is_connected() const {
    std::vector<bool> seen(n_, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const auto v = frontier.front();
      frontier.pop();
      for (auto u : adjacency_[v]) {
        if (!seen[u]) {
          seen[u] = true;
          ++count;
          frontier.push(u);
        }
      }
    }
    return count == n_;
  }

  bool is_regular() const {
    for (std::size_t i = 1; i < n_; ++i) {
      if (degree(i) != degree(0)) return false;
    }
    return true;
  }

  /// True when the edges are exactly {i, i+1 mod N} for N >= 3.
  bool is_ring() const {
    if (n_ < 3 || edges_.size() != n_) return false;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!has_edge(i, (i + 1) % n_)) return false;
    }
    return true;
  }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

enum class GraphKind { ring, k_regular, erdos_renyi, complete };

inline const char* to_string(GraphKind k) {
  switch (k) {
    case GraphKind::ring: return "ring";
    case GraphKind::k_regular: return "k_regular";
    case GraphKind::erdos_renyi: return "erdos_renyi";
    case GraphKind::complete: return "complete";
  }
  return "unknown";
}

inline GraphKind graph_kind_from_string(const std::string& s) {
  if (s == "ring") return GraphKind::ring;
  if (s == "k_regular") return GraphKind::k_regular;
  if (s == "erdos_renyi" || s == "er") return GraphKind::erdos_renyi;
  if (s == "complete") return GraphKind::complete;
  throw ConfigError("unknown graph kind '" + s + "'");
}

struct GraphSpec {
  GraphKind kind = GraphKind::ring;
  std::size_t k = 4;   // k_regular
  double p = 0.5;      // erdos_renyi
};

inline constexpr int kMaxGraphRetries = 100;

inline Graph build_graph(const GraphSpec& spec, std::size_t n, Rng& rng) {
  if (n < 2) throw ConfigError("build_graph: need N >= 2");
  std::vector<Graph::Edge> edges;
  switch (spec.kind) {
    case GraphKind::ring:
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        if (n == 2 && i == 1) break;  // 1-0 duplicates 0-1
        edges.emplace_back(i, j);
      }
      return Graph(n, std::move(edges));
    case GraphKind::k_regular: {
      // circulant: neighbors at offsets +-1 .. +-k/2
      if (spec.k < 2 || spec.k % 2 != 0 || spec.k >= n) {
        throw ConfigError("build_graph: k-regular needs even k with 2 <= k < N (k=" + std::to_string(spec.k) +
                          ", N=" + std::to_string(n) + ")");
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 1; d <= spec.k / 2; ++d) {
          // d < N/2, so every undirected edge is generated exactly once
          edges.emplace_back(i, (i + d) % n);
        }
      }
      return Graph(n, std::move(edges));
    }
    case GraphKind::erdos_renyi: {
      if (!(spec.p > 0.0 && spec.p <= 1.0)) throw ConfigError("build_graph: ER needs 0 < p <= 1");
      for (int attempt = 0; attempt < kMaxGraphRetries; ++attempt) {
        edges.clear();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.bernoulli(spec.p)) edges.emplace_back(i, j);
          }
        }
        Graph g(n, edges);
        if (g.is_connected()) return g;
      }
      throw GenerationError("build_graph: no connected Erdos-Renyi graph after " +
                            std::to_string(kMaxGraphRetries) + " attempts");
    }
    case GraphKind::complete:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      }
      return Graph(n, std::move(edges));
  }
  throw ConfigError("build_graph: unknown graph kind");
}

enum class ConsensusScheme { metropolis, uniform_average, circulant };

inline const char* to_string(ConsensusScheme c) {
  switch (c) {
    case ConsensusScheme::metropolis: return "metropolis";
    case ConsensusScheme::uniform_average: return "uniform_average";
    case ConsensusScheme::circulant: return "circulant";
  }
  return "unknown";
}

inline ConsensusScheme consensus_scheme_from_string(const std::string& s) {
  if (s == "metropolis") return ConsensusScheme::metropolis;
  if (s == "uniform_average") return ConsensusScheme::uniform_average;
  if (s == "circulant") return ConsensusScheme::circulant;
  throw ConfigError("unknown consensus scheme '" + s + "'");
}

struct ConsensusSpec {
  ConsensusScheme scheme = ConsensusScheme::metropolis;
  double self_weight = 0.4;      // circulant
  double neighbor_weight = 0.3;  // circulant
};

struct ConsensusMatrix {
  Eigen::MatrixXd weights;
  double eta = 0.0;  // smallest positive entry
  bool doubly_stochastic = false;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
};

struct ConsensusReport {
  double eta = 0.0;
  bool is_doubly_stochastic = false;
  bool nonnegative = false;
  bool positive_diagonal = false;
  double second_largest_singular_value = 0.0;

  /// Doubly stochastic, nonnegative, strictly positive diagonal.
  bool satisfies_weight_assumption() const { return is_doubly_stochastic && nonnegative && positive_diagonal; }
};

inline constexpr double kStochasticTolerance = 1e-12;

inline ConsensusReport validate_consensus(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ConfigError("validate_consensus: need a non-empty square matrix");
  ConsensusReport r;
  r.nonnegative = (a.array() >= 0.0).all();
  r.positive_diagonal = (a.diagonal().array() > 0.0).all();
  double eta = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (v != 0.0) eta = std::min(eta, v);
  }
  r.eta = std::isfinite(eta) ? eta : 0.0;
  const double row_err = (a.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (a.colwise().sum().array() - 1.0).abs().maxCoeff();
  r.is_doubly_stochastic = r.nonnegative && row_err <= kStochasticTolerance && col_err <= kStochasticTolerance;
  if (a.rows() > 1) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    r.second_largest_singular_value = svd.singularValues()(1);
  }
  return r;
}

/// Weight matrix for `g` under the requested scheme.
///  - metropolis: A_ij = 1/(1 + max(deg_i, deg_j)) on edges, diagonal takes the rest.
///  - uniform_average: A_ij = 1/(deg_i + 1) over the closed neighborhood. Only
///    doubly stochastic on regular graphs; a warning is recorded otherwise.
///  - circulant: fixed circulant (neighbor, self, neighbor) weights on a ring.
inline ConsensusMatrix consensus_matrix(const Graph& g, const ConsensusSpec& spec = {}) {
  const auto n = g.num_nodes();
  const auto N = static_cast<Eigen::Index>(n);
  ConsensusMatrix out;
  out.weights = Eigen::MatrixXd::Zero(N, N);
  auto& w = out.weights;
  switch (spec.scheme) {
    case ConsensusScheme::metropolis:
      for (auto [i, j] : g.edges()) {
        const double v = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
      for (Eigen::Index i = 0; i < N; ++i) w(i, i) = 1.0 - w.row(i).sum();
      break;
    case ConsensusScheme::uniform_average:
      for (std::size_t i = 0; i < n; ++i) {
        const double v = 1.0 / static_cast<double>(g.degree(i) + 1);
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = v;
        for (auto j : g.neighbors(i)) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
      break;
    case ConsensusScheme::circulant:
      if (!g.is_ring()) throw ConfigError("consensus_matrix: ring weights requested on a graph that is not a ring");
      if (std::abs(spec.self_weight + 2.0 * spec.neighbor_weight - 1.0) > kStochasticTolerance ||
          spec.self_weight <= 0.0 || spec.neighbor_weight <= 0.0) {
        throw ConfigError("consensus_matrix: ring weights must be positive with self + 2*neighbor = 1");
      }
      for (Eigen::Index i = 0; i < N; ++i) {
        w(i, i) = spec.self_weight;
        w(i, (i + 1) % N) = spec.neighbor_weight;
        w(i, (i + N - 1) % N) = spec.neighbor_weight;
      }
      break;
  }
  const auto report = validate_consensus(w);
  out.eta = report.eta;
  out.doubly_stochastic = report.is_doubly_stochastic;
  if (!report.satisfies_weight_assumption()) {
    out.warnings.push_back("consensus weights are not doubly stochastic with positive diagonal "
                           "(irregular graph under neighborhood averaging?)");
  }
  return out;
}

struct StepSizeCondition {
  bool ok = false;
  double rho = 0.0;
  double threshold = 0.0;  // largest admissible beta*K
};

/// Consensus-error contraction condition: beta*K <= min{1/2, eta^(N-1) / (4 (1 - eta^(N-1)))},
/// with rho = (1 + 4 beta K)(1 - eta^(N-1)).
inline StepSizeCondition step_size_condition(double beta, std::size_t K, double eta, std::size_t N) {
  if (!(beta > 0.0)) throw ConfigError("step_size_condition: beta must be > 0");
  if (K < 1) throw ConfigError("step_size_condition: K must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("step_size_condition: eta must lie in (0, 1]");
  if (N < 1) throw ConfigError("step_size_condition: N must be >= 1");
  const double bk = beta * static_cast<double>(K);
  const double eta_pow = std::pow(eta, static_cast<double>(N - 1));
  const double gap = 1.0 - eta_pow;
  StepSizeCondition c;
  if (gap <= 0.0) {
    // exact averaging: the deviation is wiped out by every consensus step
    c.threshold = 0.5;
    c.rho = 0.0;
  } else {
    c.threshold = std::min(0.5, eta_pow / (4.0 * gap));
    c.rho = (1.0 + 4.0 * bk) * gap;
  }
  c.ok = bk <= c.threshold;
  return c;
}

}  // namespace dtd
