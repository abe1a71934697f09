#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fxdispatch/errors.hpp"
#include "fxdispatch/linalg.hpp"

namespace fxd {

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 1.0;

  bool operator==(const Edge&) const = default;
};

/// Weighted undirected graph for the local (neighbour-to-neighbour) layer.
/// Edges are normalised to i < j. Structural validity is enforced here;
/// connectivity is recorded and left to callers that need it.
class LocalTopology {
 public:
  LocalTopology() = default;

  LocalTopology(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ == 0) throw ConfigError("topology: node count must be positive");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& e : edges_) {
      if (e.i == e.j) {
        std::ostringstream os;
        os << "topology: self-loop at node " << e.i;
        throw ConfigError(os.str());
      }
      if (e.i >= n_ || e.j >= n_) {
        std::ostringstream os;
        os << "topology: edge (" << e.i << "," << e.j << ") references a node >= " << n_;
        throw ConfigError(os.str());
      }
      if (!(e.weight > 0.0)) {
        std::ostringstream os;
        os << "topology: edge (" << e.i << "," << e.j << ") has non-positive weight " << e.weight;
        throw ConfigError(os.str());
      }
      if (e.i > e.j) std::swap(e.i, e.j);
      if (!seen.emplace(e.i, e.j).second) {
        std::ostringstream os;
        os << "topology: duplicate edge (" << e.i << "," << e.j << ")";
        throw ConfigError(os.str());
      }
    }
  }

  static LocalTopology path(std::size_t n, double weight = 1.0) {
    std::vector<Edge> e;
    for (std::size_t k = 0; k + 1 < n; ++k) e.push_back({k, k + 1, weight});
    return {n, std::move(e)};
  }

  static LocalTopology complete(std::size_t n, double weight = 1.0) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j, weight});
    return {n, std::move(e)};
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool operator==(const LocalTopology&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
};

inline Eigen::MatrixXd laplacian(const LocalTopology& top) {
  const auto n = static_cast<Eigen::Index>(top.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : top.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    l(i, j) -= e.weight;
    l(j, i) -= e.weight;
    l(i, i) += e.weight;
    l(j, j) += e.weight;
  }
  return l;
}

// Breadth-first traversal from node 0.
inline bool check_connected(const LocalTopology& top) {
  const std::size_t n = top.size();
  if (n <= 1) return true;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : top.edges()) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

struct SpectralSummary {
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd eigenvectors;
  double phi2 = 0.0;            // algebraic connectivity; 0 for a single node
};

inline SpectralSummary spectrum(const LocalTopology& top) {
  if (!check_connected(top))
    throw AssumptionViolation("spectrum: local topology is disconnected (phi2 = 0)");
  auto eig = jacobi_eigen(laplacian(top));
  SpectralSummary s;
  s.eigenvalues = eig.values;
  s.eigenvectors = eig.vectors;
  s.phi2 = top.size() > 1 ? eig.values[1] : 0.0;
  if (top.size() > 1 && !(s.phi2 > 1e-10))
    throw AssumptionViolation("spectrum: algebraic connectivity is not positive");
  return s;
}

}  // namespace fxd
