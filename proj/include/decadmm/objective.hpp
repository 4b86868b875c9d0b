#pragma once

#include <optional>

#include "decadmm/common.hpp"

namespace decadmm {

/// A local loss f_i seen through a stochastic first-order oracle.
///
/// Objectives are immutable; all randomness comes through the caller's engine,
/// so one objective can be shared by concurrent runs.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int dim() const = 0;

  /// Mini-batch gradient G_i(θ; ζ) over `batch_size` draws.
  virtual Vector stochastic_gradient(const Vector& theta, int batch_size, Rng& rng) const = 0;

  /// Number of samples in the local dataset, if the objective has one.
  virtual std::optional<int> dataset_size() const { return std::nullopt; }

  virtual std::optional<Vector> full_gradient(const Vector& /*theta*/) const {
    return std::nullopt;
  }

  virtual std::optional<double> loss(const Vector& /*theta*/) const { return std::nullopt; }
};

}  // namespace decadmm
