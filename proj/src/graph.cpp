#include "decadmm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>

namespace decadmm {

namespace {

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

double NetworkGraph::effective_omega() const {
  const double full = 0.5 * n * (n - 1);
  return full > 0 ? static_cast<double>(edges.size()) / full : 0.0;
}

std::vector<int> NetworkGraph::degrees() const {
  std::vector<int> deg(n, 0);
  for (const auto& [i, j] : edges) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

std::vector<std::vector<int>> NetworkGraph::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

bool NetworkGraph::has_edge(int i, int j) const {
  const auto e = ordered(i, j);
  return std::find(edges.begin(), edges.end(), e) != edges.end();
}

bool NetworkGraph::is_connected() const {
  if (n == 0) return false;
  const auto adj = adjacency();
  std::vector<bool> seen(n, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n;
}

bool NetworkGraph::has_valid_cycle() const {
  if (static_cast<int>(cycle.size()) != n || n < 2) return false;
  std::vector<bool> seen(n, false);
  for (int a : cycle) {
    if (a < 0 || a >= n || seen[a]) return false;
    seen[a] = true;
  }
  for (int p = 0; p < n; ++p) {
    if (!has_edge(cycle[p], cycle[(p + 1) % n])) return false;
  }
  return true;
}

int edge_budget(int n, double omega) {
  const double raw = omega * 0.5 * n * (n - 1);
  // round half up; the epsilon absorbs representation error such as 0.3*190
  return static_cast<int>(std::floor(raw + 0.5 + 1e-9));
}

NetworkGraph generate_network(int n, double omega, std::uint64_t seed, BudgetPolicy policy) {
  if (n < 2) throw InvalidSize("agent count must be >= 2, got " + std::to_string(n));
  if (!(omega > 0.0 && omega <= 1.0)) {
    throw InvalidRatio("connectivity ratio must lie in (0, 1], got " + std::to_string(omega));
  }

  NetworkGraph g;
  g.n = n;
  g.omega = omega;
  g.seed = seed;

  const int max_edges = n * (n - 1) / 2;
  const int ring = g.ring_edge_count();
  int budget = edge_budget(n, omega);
  if (budget < ring) {
    if (policy == BudgetPolicy::kStrict) {
      throw InvalidRatio("edge budget round(" + std::to_string(omega) + "*" +
                         std::to_string(max_edges) + ")=" + std::to_string(budget) +
                         " is below the ring size " + std::to_string(ring));
    }
    budget = ring;
  }
  budget = std::min(budget, max_edges);

  Rng rng = make_rng(seed, Stream::kGraph);
  g.cycle.resize(n);
  std::iota(g.cycle.begin(), g.cycle.end(), 0);
  std::shuffle(g.cycle.begin(), g.cycle.end(), rng);

  std::set<std::pair<int, int>> used;
  for (int p = 0; p < ring; ++p) {
    const auto e = ordered(g.cycle[p], g.cycle[(p + 1) % n]);
    g.edges.push_back(e);
    used.insert(e);
  }

  std::vector<std::pair<int, int>> candidates;
  candidates.reserve(max_edges - ring);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!used.count({i, j})) candidates.emplace_back(i, j);
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto extra = static_cast<std::size_t>(budget - ring);
  g.edges.insert(g.edges.end(), candidates.begin(), candidates.begin() + extra);
  return g;
}

Matrix metropolis_weights(const NetworkGraph& g) {
  const auto deg = g.degrees();
  Matrix w = Matrix::Zero(g.n, g.n);
  for (const auto& [i, j] : g.edges) {
    const double v = 1.0 / (1.0 + std::max(deg[i], deg[j]));
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < g.n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

void write_graph(std::ostream& os, const NetworkGraph& g) {
  os << g.n << ' ' << std::setprecision(17) << g.omega << ' ' << g.seed << '\n';
  // cycle edges first, written in traversal direction
  for (int p = 0; p < g.ring_edge_count(); ++p) {
    os << g.cycle[p] << ' ' << g.cycle[(p + 1) % g.n] << '\n';
  }
  for (std::size_t e = g.ring_edge_count(); e < g.edges.size(); ++e) {
    os << g.edges[e].first << ' ' << g.edges[e].second << '\n';
  }
}

NetworkGraph read_graph(std::istream& is) {
  NetworkGraph g;
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("graph file: missing header");
  {
    std::istringstream header(line);
    if (!(header >> g.n >> g.omega >> g.seed)) {
      throw InvalidArgument("graph file: header must be 'n omega seed'");
    }
  }
  if (g.n < 2) throw InvalidSize("graph file: n must be >= 2");
  std::vector<std::pair<int, int>> pairs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int i = 0, j = 0;
    if (!(row >> i >> j) || i < 0 || j < 0 || i >= g.n || j >= g.n || i == j) {
      throw InvalidArgument("graph file: bad edge line '" + line + "'");
    }
    pairs.emplace_back(i, j);
  }
  const int ring = g.ring_edge_count();
  if (static_cast<int>(pairs.size()) < ring) {
    throw InvalidArgument("graph file: fewer edges than the ring needs");
  }
  g.cycle.push_back(pairs[0].first);
  for (int p = 0; p < ring; ++p) {
    if (p > 0 && pairs[p].first != g.cycle.back()) {
      throw InvalidArgument("graph file: cycle edges are not contiguous");
    }
    if (p + 1 < g.n) g.cycle.push_back(pairs[p].second);
  }
  for (const auto& [i, j] : pairs) g.edges.push_back(ordered(i, j));
  if (!g.has_valid_cycle() || !g.is_connected()) {
    throw InvalidArgument("graph file: stored cycle is not Hamiltonian");
  }
  return g;
}

}  // namespace decadmm
