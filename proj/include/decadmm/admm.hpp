#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "decadmm/common.hpp"
#include "decadmm/graph.hpp"
#include "decadmm/objective.hpp"
#include "decadmm/solver.hpp"

namespace decadmm {

struct HyperParams {
  double rho = 1.0;      // penalty ρ > 0
  double tau = 0.0;      // proximal weight τ ≥ 0
  double gamma = 1.0;    // dual step scale γ > 0
  double eta_bar = 0.0;  // EMA cap η̄ ∈ [0, 1)
  double iota_sq = 1.0;  // variance-control constant ι² > 0
  int batch_size = 1;    // M ≥ 1

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;
};

struct AgentState {
  Vector theta;
  Vector lambda;

  static AgentState zeros(int dim) { return {Vector::Zero(dim), Vector::Zero(dim)}; }
};

/// Message passed along the cycle: consensus iterate z and EMA gradient μ.
struct Token {
  Vector z;
  Vector mu;

  static Token zeros(int dim) { return {Vector::Zero(dim), Vector::Zero(dim)}; }
};

/// EMA weight for this visit: η̄ when η̄²‖μ−g‖² ≤ ι²/M, otherwise √(ι²/M)/‖μ−g‖.
/// The returned value always satisfies η²‖μ−g‖² ≤ ι²/M in floating point.
double adaptive_eta(const Vector& mu, const Vector& g, double eta_bar, double iota_sq,
                    int batch_size);

/// η·μ + (1−η)·g
Vector ema_update(const Vector& mu, const Vector& g, double eta);

/// Closed-form minimizer of the linearized proximal Lagrangian
///   ⟨μ, θ−θᵏ⟩ + (ρ/2)‖z − θ + λ/ρ‖² + (τ/2)‖θ − θᵏ‖²,
/// i.e. (ρz + λ + τθᵏ − μ)/(ρ + τ). `token.mu` must already hold μᵏ⁺¹.
Vector primal_update(const AgentState& state, const Token& token, const HyperParams& hp);

/// λ + ργ(z − θ_new)
Vector dual_update(const Vector& lambda, const Vector& z, const Vector& theta_new,
                   const HyperParams& hp);

/// Incremental maintenance of z = (1/N)Σ(θ_i − λ_i/ρ).
Vector token_z_update(const Vector& z, const Vector& theta_old, const Vector& theta_new,
                      const Vector& lambda_old, const Vector& lambda_new, double rho, int n);

enum class AdmmVariant {
  kAdaptive,    // asI-ADMM: adaptive EMA, token carries (z, μ)
  kStochastic,  // sI-ADMM: η ≡ 0, token carries z only
  kFullBatch,   // proximal I-ADMM: exact local gradients, η ≡ 0
};

std::string to_string(AdmmVariant v);

/// What happened during one visit; used by monitors and tests.
struct VisitInfo {
  std::int64_t k = 0;          // iteration index before the visit
  int agent = 0;
  double eta = 0.0;
  double eta_lhs = 0.0;        // η²‖μ − G‖²
  double eta_rhs = 0.0;        // ι²/M
  double theta_step_sq = 0.0;  // ‖θᵏ⁺¹ − θᵏ‖² of the visited agent
  double z_step_sq = 0.0;      // ‖zᵏ⁺¹ − zᵏ‖²
};

/// Coefficients of the per-iteration descent inequality
///   Vᵏ⁺¹ ≤ Vᵏ + (ι²+σ²)/M − χ‖Δθ‖² − φ‖Δz‖²
/// with χ = (ρ − L + 2τ + 1)/2 − 2ρ/γ and φ = Nρ/2 − 2ρN²/γ.
struct DescentCoefficients {
  double chi = 0.0;
  double phi = 0.0;
};

DescentCoefficients descent_coefficients(const HyperParams& hp, double lipschitz, int n);

/// Checks Vᵏ⁺¹ ≤ Vᵏ + slack − χ‖Δθ‖² − φ‖Δz‖² visit by visit. `slack` is the
/// stochastic term (ι²+σ̂²)/M, zero for a deterministic run.
class DescentMonitor {
 public:
  DescentMonitor(DescentCoefficients coeffs, double slack = 0.0, double rel_tol = 1e-12);

  /// Returns whether the inequality held for this visit.
  bool observe(double v_before, double v_after, const VisitInfo& info);

  std::int64_t observed() const { return observed_; }
  std::int64_t holds() const { return holds_; }
  std::int64_t violations() const { return observed_ - holds_; }
  /// Visits where V was not finite; they count as violations.
  std::int64_t non_finite() const { return non_finite_; }
  double hold_fraction() const;
  /// Largest excess of the left side over the right side seen so far.
  double worst_excess() const { return worst_excess_; }

 private:
  DescentCoefficients coeffs_;
  double slack_;
  double rel_tol_;
  std::int64_t observed_ = 0;
  std::int64_t holds_ = 0;
  std::int64_t non_finite_ = 0;
  double worst_excess_ = -std::numeric_limits<double>::infinity();
};

/// Token-passing incremental ADMM. Strictly single-threaded; one instance per run.
class IncrementalAdmm final : public DecentralizedSolver {
 public:
  IncrementalAdmm(NetworkGraph graph, std::vector<std::shared_ptr<const Objective>> objectives,
                  HyperParams hp, AdmmVariant variant, std::uint64_t seed);

  /// One visit at cycle position k mod N.
  VisitInfo visit();

  void step() override { visit(); }
  std::int64_t iteration() const override { return k_; }
  std::uint64_t comm_scalars() const override { return comm_scalars_; }
  std::vector<Vector> thetas() const override;
  std::optional<double> lyapunov() const override;
  std::string name() const override { return to_string(variant_); }

  const std::vector<AgentState>& agents() const { return agents_; }
  const Token& token() const { return token_; }
  const HyperParams& hyper_params() const { return hp_; }
  const NetworkGraph& graph() const { return graph_; }
  AdmmVariant variant() const { return variant_; }
  int dim() const { return dim_; }

  /// Scalars sent per token hop: 2m when μ travels with z, m otherwise.
  std::uint64_t scalars_per_hop() const;

  /// (1/N)Σ(θ_i − λ_i/ρ) recomputed from the agent states.
  Vector recomputed_z() const;

  std::int64_t eta_violations() const { return eta_violations_; }

  /// Versioned text snapshot of θ, λ, z, μ, k, the communication counter and
  /// every sampling stream. Graph, objectives and hyperparameters are not
  /// included; restore into an engine built from the same configuration.
  void save_checkpoint(std::ostream& os) const;
  void load_checkpoint(std::istream& is);

 private:
  Vector draw_gradient(int agent, int* effective_batch);

  NetworkGraph graph_;
  std::vector<std::shared_ptr<const Objective>> objectives_;
  HyperParams hp_;
  AdmmVariant variant_;
  int n_ = 0;
  int dim_ = 0;
  std::vector<AgentState> agents_;
  Token token_;
  std::vector<Rng> sampling_;
  std::int64_t k_ = 0;
  std::uint64_t comm_scalars_ = 0;
  std::int64_t eta_violations_ = 0;
};

}  // namespace decadmm
