#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decadmm/common.hpp"
#include "decadmm/graph.hpp"
#include "decadmm/objective.hpp"
#include "decadmm/solver.hpp"

namespace decadmm {

/// Synchronous gossip state: one iterate per agent plus the mixing matrix.
struct GossipState {
  std::vector<Vector> thetas;
  Matrix mixing;
  double step_size = 0.0;

  void validate() const;
};

/// Where the local gradients of a baseline come from. `batch_size == 0`
/// means the exact local gradient; objectives without one fall back to a
/// single-sample estimate.
struct GradientSource {
  int batch_size = 0;

  Vector operator()(const Objective& obj, const Vector& theta, Rng& rng) const;
};

/// θ_i ← Σ_j W_ij θ_j − α g_i for all i, where g_i are gradients at the old iterates.
std::vector<Vector> dgd_round(const GossipState& state, std::span<const Vector> grads);

/// θ^{k+2} = (I+W)θ^{k+1} − W̃θ^k − γ(g^{k+1} − g^k), W̃ = (I+W)/2.
std::vector<Vector> extra_round(const GossipState& state, std::span<const Vector> prev_thetas,
                                std::span<const Vector> grads, std::span<const Vector> prev_grads);

/// θ − γ g
Vector igd_step(const Vector& theta, const Vector& grad, double step_size);

class DgdSolver final : public DecentralizedSolver {
 public:
  DgdSolver(const NetworkGraph& graph, std::vector<std::shared_ptr<const Objective>> objectives,
            double step_size, GradientSource source, std::uint64_t seed);

  void step() override;
  std::int64_t iteration() const override { return k_; }
  std::uint64_t comm_scalars() const override { return comm_scalars_; }
  std::vector<Vector> thetas() const override { return state_.thetas; }
  std::string name() const override { return "dgd"; }

  /// 2|E|·m
  std::uint64_t scalars_per_round() const { return per_round_; }

 private:
  std::vector<std::shared_ptr<const Objective>> objectives_;
  GossipState state_;
  GradientSource source_;
  std::vector<Rng> sampling_;
  std::uint64_t per_round_ = 0;
  std::int64_t k_ = 0;
  std::uint64_t comm_scalars_ = 0;
};

class ExtraSolver final : public DecentralizedSolver {
 public:
  ExtraSolver(const NetworkGraph& graph, std::vector<std::shared_ptr<const Objective>> objectives,
              double step_size, GradientSource source, std::uint64_t seed);

  void step() override;
  std::int64_t iteration() const override { return k_; }
  std::uint64_t comm_scalars() const override { return comm_scalars_; }
  std::vector<Vector> thetas() const override { return state_.thetas; }
  std::string name() const override { return "extra"; }

  std::uint64_t scalars_per_round() const { return per_round_; }

 private:
  std::vector<Vector> gradients();

  std::vector<std::shared_ptr<const Objective>> objectives_;
  GossipState state_;
  std::vector<Vector> prev_thetas_;
  std::vector<Vector> prev_grads_;
  GradientSource source_;
  std::vector<Rng> sampling_;
  std::uint64_t per_round_ = 0;
  std::int64_t k_ = 0;
  std::uint64_t comm_scalars_ = 0;
};

/// Incremental gradient descent: one iterate travels the cycle and the agent
/// holding it takes a local gradient step. Each agent reports the last
/// iterate it produced (zero until first visited).
class IgdSolver final : public DecentralizedSolver {
 public:
  IgdSolver(const NetworkGraph& graph, std::vector<std::shared_ptr<const Objective>> objectives,
            double step_size, GradientSource source, std::uint64_t seed);

  void step() override;
  std::int64_t iteration() const override { return k_; }
  std::uint64_t comm_scalars() const override { return comm_scalars_; }
  std::vector<Vector> thetas() const override { return held_; }
  std::string name() const override { return "igd"; }

  const Vector& iterate() const { return theta_; }

 private:
  std::vector<int> cycle_;
  std::vector<std::shared_ptr<const Objective>> objectives_;
  double step_size_;
  GradientSource source_;
  std::vector<Rng> sampling_;
  Vector theta_;
  std::vector<Vector> held_;
  std::int64_t k_ = 0;
  std::uint64_t comm_scalars_ = 0;
};

}  // namespace decadmm
