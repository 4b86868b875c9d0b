#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "decadmm/common.hpp"

namespace decadmm {

class InvalidSize : public Error {
 public:
  using Error::Error;
};

class InvalidRatio : public Error {
 public:
  using Error::Error;
};

/// What to do when round(ω·n(n−1)/2) cannot hold the ring through all agents.
enum class BudgetPolicy {
  kStrict,  // throw InvalidRatio
  kClamp,   // raise the budget to the ring size and report the effective ratio
};

/// Undirected connected agent network with a stored Hamiltonian cycle.
///
/// Edges are kept as (i, j) with i < j. The first `ring_edge_count()` entries
/// of `edges` are the cycle edges in visiting order; the rest are the extra
/// random links.
struct NetworkGraph {
  int n = 0;
  double omega = 1.0;            // requested connectivity ratio
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> cycle;        // cycle[p] = agent visited at position p

  double effective_omega() const;
  int ring_edge_count() const { return n == 2 ? 1 : n; }
  std::vector<int> degrees() const;
  std::vector<std::vector<int>> adjacency() const;
  bool has_edge(int i, int j) const;
  bool is_connected() const;
  bool has_valid_cycle() const;
};

/// Number of edges requested for (n, ω) with round-half-up.
int edge_budget(int n, double omega);

/// Random ring over a random permutation plus uniform extra edges. Deterministic
/// for a fixed seed.
NetworkGraph generate_network(int n, double omega, std::uint64_t seed,
                              BudgetPolicy policy = BudgetPolicy::kStrict);

/// Metropolis–Hastings mixing matrix: W_ij = 1/(1+max(deg_i, deg_j)) on edges,
/// diagonal takes the remainder of the row.
Matrix metropolis_weights(const NetworkGraph& g);

/// Plain-text form: header "n ω seed", then one "i j" pair per line. The first
/// lines are the cycle edges in visiting order so the cycle survives a reload.
void write_graph(std::ostream& os, const NetworkGraph& g);
NetworkGraph read_graph(std::istream& is);

}  // namespace decadmm
