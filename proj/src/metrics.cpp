#include "decadmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace decadmm {

double accuracy(std::span<const Vector> thetas, std::span<const Vector> thetas0,
                const Vector& theta_star) {
  if (thetas.empty() || thetas.size() != thetas0.size()) {
    throw InvalidArgument("accuracy: need matching non-empty current and initial iterates");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    require_same_dim(thetas[i], theta_star, "accuracy");
    const double denom = (thetas0[i] - theta_star).squaredNorm();
    if (std::sqrt(denom) < 1e-12) {
      throw DegenerateInit("accuracy: agent " + std::to_string(i) + " starts at the optimum");
    }
    acc += (thetas[i] - theta_star).squaredNorm() / denom;
  }
  return acc / static_cast<double>(thetas.size());
}

double consensus_error(std::span<const Vector> thetas) {
  if (thetas.empty()) throw InvalidArgument("consensus_error: no agents");
  Vector mean = Vector::Zero(thetas.front().size());
  for (const auto& t : thetas) mean += t;
  mean /= static_cast<double>(thetas.size());
  double acc = 0.0;
  for (const auto& t : thetas) acc += (t - mean).squaredNorm();
  return acc / static_cast<double>(thetas.size());
}

double lyapunov_value(std::span<const Vector> thetas, std::span<const Vector> lambdas,
                      const Vector& z, double rho,
                      std::span<const std::shared_ptr<const Objective>> objectives) {
  if (thetas.size() != lambdas.size() || thetas.size() != objectives.size()) {
    throw InvalidArgument("lyapunov_value: agent counts differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const auto f = objectives[i]->loss(thetas[i]);
    if (!f) throw NotAvailable("lyapunov_value: objective has no exact loss");
    const Vector gap = z - thetas[i];
    total += *f + lambdas[i].dot(gap) + 0.5 * rho * gap.squaredNorm();
  }
  return total;
}

double avg_reward(std::span<const double> returns) {
  if (returns.empty()) throw InvalidArgument("avg_reward: no returns");
  double acc = 0.0;
  for (double r : returns) acc += r;
  return acc / static_cast<double>(returns.size());
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw InvalidArgument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  double running = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    running += series[k];
    if (k >= static_cast<std::size_t>(window)) running -= series[k - window];
    const auto count = std::min<std::size_t>(k + 1, static_cast<std::size_t>(window));
    out[k] = running / static_cast<double>(count);
  }
  return out;
}

namespace {

void put(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return std::stod(cell);
}

}  // namespace

void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> records,
                       bool include_wall_time) {
  os << kMetricsCsvHeader << '\n';
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.k << ',' << r.comm_scalars << ',';
    put(os, r.accuracy);
    os << ',';
    put(os, r.consensus_error);
    os << ',';
    put(os, r.avg_reward);
    os << ',';
    put(os, r.lyapunov);
    os << ',';
    if (include_wall_time) os << r.wall_time_s;
    os << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsCsvHeader) {
    throw InvalidArgument("metrics csv: unexpected header");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw InvalidArgument("metrics csv: row needs 7 cells");
    MetricsRecord r;
    r.k = std::stoll(cells[0]);
    r.comm_scalars = std::stoull(cells[1]);
    r.accuracy = parse_cell(cells[2]);
    r.consensus_error = parse_cell(cells[3]);
    r.avg_reward = parse_cell(cells[4]);
    r.lyapunov = parse_cell(cells[5]);
    r.wall_time_s = parse_cell(cells[6]).value_or(0.0);
    out.push_back(r);
  }
  return out;
}

}  // namespace decadmm
