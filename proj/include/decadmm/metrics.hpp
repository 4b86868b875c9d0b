#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "decadmm/common.hpp"
#include "decadmm/objective.hpp"

namespace decadmm {

class DegenerateInit : public Error {
 public:
  using Error::Error;
};

class NotAvailable : public Error {
 public:
  using Error::Error;
};

/// One sample of a run. Missing metrics stay empty and serialize as empty cells.
struct MetricsRecord {
  std::int64_t k = 0;
  std::uint64_t comm_scalars = 0;  // cumulative transmitted real scalars
  std::optional<double> accuracy;
  std::optional<double> consensus_error;
  std::optional<double> avg_reward;
  std::optional<double> lyapunov;
  double wall_time_s = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// (1/N) Σ ‖θ_i − θ*‖² / ‖θ_i⁰ − θ*‖².
double accuracy(std::span<const Vector> thetas, std::span<const Vector> thetas0,
                const Vector& theta_star);

/// (1/N) Σ ‖θ_i − θ̄‖².
double consensus_error(std::span<const Vector> thetas);

/// Augmented Lagrangian Σ_i f_i(θ_i) + ⟨λ_i, z − θ_i⟩ + (ρ/2)‖z − θ_i‖² with exact
/// local losses. Throws NotAvailable if an objective has no closed-form loss.
double lyapunov_value(std::span<const Vector> thetas, std::span<const Vector> lambdas,
                      const Vector& z, double rho,
                      std::span<const std::shared_ptr<const Objective>> objectives);

/// Mean of per-agent episode returns.
double avg_reward(std::span<const double> returns);

/// Trailing moving average; the first window−1 entries average what is available.
std::vector<double> moving_average(std::span<const double> series, int window);

inline constexpr const char* kMetricsCsvHeader =
    "k,comm_scalars,accuracy,consensus_error,avg_reward,lyapunov,wall_time_s";

/// `include_wall_time=false` leaves the wall-clock column empty so that
/// repeated runs produce identical files.
void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> records,
                       bool include_wall_time = false);
std::vector<MetricsRecord> read_metrics_csv(std::istream& is);

}  // namespace decadmm
