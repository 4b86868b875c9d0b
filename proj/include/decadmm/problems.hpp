#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "decadmm/common.hpp"
#include "decadmm/objective.hpp"

namespace decadmm {

enum class RegressionKind { kRidge, kLogistic };

/// Local samples of one agent; row m of `inputs` is o_{i,m}.
struct RegressionDataset {
  Matrix inputs;
  Vector targets;
  int owner = 0;

  int size() const { return static_cast<int>(targets.size()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

/// Generator parameters. The accuracy metric uses the optimizer from
/// centralized_solve, not this θ.
struct GroundTruth {
  Vector theta_star;
  double noise_sigma = 0.0;
};

struct SynthesizedProblem {
  std::vector<RegressionDataset> datasets;
  GroundTruth truth;
};

/// Inputs are feature_scale · N(0, I); the default keeps standard normal entries.
SynthesizedProblem synthesize_ridge(int n_agents, int samples_per_agent, int dim,
                                    double noise_sigma, std::uint64_t seed,
                                    double feature_scale = 1.0);

/// Labels are +1 with probability sigmoid(θᵀo). `theta_gen` overrides the
/// standard-normal draw of the generator.
SynthesizedProblem synthesize_logistic(int n_agents, int samples_per_agent, int dim,
                                       std::uint64_t seed,
                                       const Vector* theta_gen = nullptr);

// Losses and gradients over the rows listed in `rows` (all rows when empty).
double ridge_loss(const Vector& theta, const RegressionDataset& data,
                  std::span<const int> rows = {});
Vector ridge_gradient(const Vector& theta, const RegressionDataset& data,
                      std::span<const int> rows = {});
double logistic_loss(const Vector& theta, const RegressionDataset& data,
                     std::span<const int> rows = {});
Vector logistic_gradient(const Vector& theta, const RegressionDataset& data,
                         std::span<const int> rows = {});

double sigmoid(double x);
double softplus(double x);

/// f_i for one agent. `l2` adds (l2/2)‖θ‖² to the loss; the default keeps the
/// plain least-squares / logistic loss.
class RegressionObjective final : public Objective {
 public:
  RegressionObjective(RegressionKind kind, std::shared_ptr<const RegressionDataset> data,
                      double l2 = 0.0);

  int dim() const override { return data_->dim(); }
  Vector stochastic_gradient(const Vector& theta, int batch_size, Rng& rng) const override;
  std::optional<int> dataset_size() const override { return data_->size(); }
  std::optional<Vector> full_gradient(const Vector& theta) const override;
  std::optional<double> loss(const Vector& theta) const override;

  RegressionKind kind() const { return kind_; }
  const RegressionDataset& data() const { return *data_; }

  /// Largest eigenvalue of the Hessian bound: exact for ridge, sup for logistic.
  double lipschitz_constant() const;

 private:
  RegressionKind kind_;
  std::shared_ptr<const RegressionDataset> data_;
  double l2_;
};

std::vector<std::shared_ptr<const Objective>> make_regression_objectives(
    RegressionKind kind, const std::vector<RegressionDataset>& datasets, double l2 = 0.0);

struct CentralizedSolution {
  Vector theta;
  bool regularized = false;  // normal matrix was singular; 1e-12 ridge added
  int iterations = 0;        // gradient steps (logistic only)
  double gradient_norm = 0.0;
};

/// Minimizer of Σ_i f_i(θ) over the pooled data: normal equations for ridge,
/// gradient descent with Barzilai-Borwein trial steps and backtracking for
/// logistic (stops at ‖∇‖ ≤ 1e-10).
CentralizedSolution centralized_solve(RegressionKind kind,
                                      const std::vector<RegressionDataset>& datasets,
                                      double l2 = 0.0);

/// CSV with one row per sample: x0..x{d-1}, target, agent.
void write_datasets_csv(std::ostream& os, const std::vector<RegressionDataset>& datasets);
std::vector<RegressionDataset> read_datasets_csv(std::istream& is);

}  // namespace decadmm
