#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decadmm/common.hpp"

namespace decadmm {

/// Common surface of the token-passing engine and the gossip/incremental
/// baselines, so one metrics probe and one runner serve all of them.
class DecentralizedSolver {
 public:
  virtual ~DecentralizedSolver() = default;

  /// One iteration: a token visit for incremental methods, one synchronous
  /// round for gossip methods.
  virtual void step() = 0;

  virtual std::int64_t iteration() const = 0;
  virtual std::uint64_t comm_scalars() const = 0;

  /// Current per-agent parameters θ_i.
  virtual std::vector<Vector> thetas() const = 0;

  /// Augmented Lagrangian at the current state, where it is defined and
  /// computable.
  virtual std::optional<double> lyapunov() const { return std::nullopt; }

  virtual std::string name() const = 0;
};

}  // namespace decadmm
