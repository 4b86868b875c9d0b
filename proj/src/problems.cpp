#include "decadmm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

namespace decadmm {

namespace {

template <typename Fn>
void for_rows(const RegressionDataset& data, std::span<const int> rows, Fn&& fn) {
  if (rows.empty()) {
    for (int m = 0; m < data.size(); ++m) fn(m);
  } else {
    for (int m : rows) fn(m);
  }
}

int row_count(const RegressionDataset& data, std::span<const int> rows) {
  const int count = rows.empty() ? data.size() : static_cast<int>(rows.size());
  if (count == 0) throw InvalidArgument("empty batch");
  return count;
}

void check_dim(const Vector& theta, const RegressionDataset& data, const char* what) {
  if (theta.size() != data.inputs.cols()) {
    throw DimensionMismatch(std::string(what) + ": theta has dimension " +
                            std::to_string(theta.size()) + ", data has " +
                            std::to_string(data.inputs.cols()));
  }
}

Matrix standard_normal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

Vector standard_normal(int n, Rng& rng) { return standard_normal(n, 1, rng).col(0); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

SynthesizedProblem synthesize_ridge(int n_agents, int samples_per_agent, int dim,
                                    double noise_sigma, std::uint64_t seed,
                                    double feature_scale) {
  if (n_agents < 1 || samples_per_agent < 1 || dim < 1) {
    throw InvalidArgument("synthesize_ridge: sizes must be positive");
  }
  if (noise_sigma < 0) throw InvalidArgument("synthesize_ridge: noise_sigma must be >= 0");
  if (!(feature_scale > 0)) throw InvalidArgument("synthesize_ridge: feature_scale must be > 0");
  SynthesizedProblem out;
  Rng truth_rng = make_rng(seed, Stream::kData, 0);
  out.truth.theta_star = standard_normal(dim, truth_rng);
  out.truth.noise_sigma = noise_sigma;
  for (int i = 0; i < n_agents; ++i) {
    Rng rng = make_rng(seed, Stream::kData, i + 1);
    RegressionDataset d;
    d.owner = i;
    d.inputs = feature_scale * standard_normal(samples_per_agent, dim, rng);
    const Vector noise = standard_normal(samples_per_agent, rng);
    d.targets = d.inputs * out.truth.theta_star + noise_sigma * noise;
    out.datasets.push_back(std::move(d));
  }
  return out;
}

SynthesizedProblem synthesize_logistic(int n_agents, int samples_per_agent, int dim,
                                       std::uint64_t seed, const Vector* theta_gen) {
  if (n_agents < 1 || samples_per_agent < 1 || dim < 1) {
    throw InvalidArgument("synthesize_logistic: sizes must be positive");
  }
  SynthesizedProblem out;
  Rng truth_rng = make_rng(seed, Stream::kData, 0);
  if (theta_gen != nullptr) {
    if (theta_gen->size() != dim) throw DimensionMismatch("synthesize_logistic: theta_gen");
    out.truth.theta_star = *theta_gen;
  } else {
    out.truth.theta_star = standard_normal(dim, truth_rng);
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int i = 0; i < n_agents; ++i) {
    Rng rng = make_rng(seed, Stream::kData, i + 1);
    RegressionDataset d;
    d.owner = i;
    d.inputs = standard_normal(samples_per_agent, dim, rng);
    d.targets.resize(samples_per_agent);
    for (int m = 0; m < samples_per_agent; ++m) {
      const double v = uniform(rng);
      d.targets(m) = v <= sigmoid(d.inputs.row(m).dot(out.truth.theta_star)) ? 1.0 : -1.0;
    }
    out.datasets.push_back(std::move(d));
  }
  return out;
}

double ridge_loss(const Vector& theta, const RegressionDataset& data, std::span<const int> rows) {
  const int count = row_count(data, rows);
  double acc = 0.0;
  for_rows(data, rows, [&](int m) {
    const double r = data.inputs.row(m).dot(theta) - data.targets(m);
    acc += r * r;
  });
  return acc / count;
}

Vector ridge_gradient(const Vector& theta, const RegressionDataset& data,
                      std::span<const int> rows) {
  const int count = row_count(data, rows);
  check_dim(theta, data, "ridge_gradient");
  Vector g = Vector::Zero(theta.size());
  for_rows(data, rows, [&](int m) {
    const double r = data.inputs.row(m).dot(theta) - data.targets(m);
    g += r * data.inputs.row(m).transpose();
  });
  return (2.0 / count) * g;
}

double logistic_loss(const Vector& theta, const RegressionDataset& data,
                     std::span<const int> rows) {
  const int count = row_count(data, rows);
  double acc = 0.0;
  for_rows(data, rows, [&](int m) {
    acc += softplus(-data.targets(m) * data.inputs.row(m).dot(theta));
  });
  return acc / count;
}

Vector logistic_gradient(const Vector& theta, const RegressionDataset& data,
                         std::span<const int> rows) {
  const int count = row_count(data, rows);
  check_dim(theta, data, "logistic_gradient");
  Vector g = Vector::Zero(theta.size());
  for_rows(data, rows, [&](int m) {
    const double t = data.targets(m);
    const double margin = t * data.inputs.row(m).dot(theta);
    g -= (t * sigmoid(-margin)) * data.inputs.row(m).transpose();
  });
  return g / count;
}

RegressionObjective::RegressionObjective(RegressionKind kind,
                                         std::shared_ptr<const RegressionDataset> data, double l2)
    : kind_(kind), data_(std::move(data)), l2_(l2) {
  if (!data_ || data_->size() < 1) throw InvalidArgument("regression objective: empty dataset");
  if (data_->inputs.rows() != data_->targets.size()) {
    throw DimensionMismatch("regression objective: inputs and targets differ in length");
  }
  if (kind_ == RegressionKind::kLogistic) {
    for (int m = 0; m < data_->size(); ++m) {
      const double t = data_->targets(m);
      if (t != 1.0 && t != -1.0) throw InvalidArgument("logistic targets must be +1 or -1");
    }
  }
  if (l2_ < 0) throw InvalidArgument("l2 must be >= 0");
}

Vector RegressionObjective::stochastic_gradient(const Vector& theta, int batch_size,
                                                Rng& rng) const {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  std::uniform_int_distribution<int> pick(0, data_->size() - 1);
  std::vector<int> rows(batch_size);
  for (int& r : rows) r = pick(rng);
  Vector g = kind_ == RegressionKind::kRidge ? ridge_gradient(theta, *data_, rows)
                                             : logistic_gradient(theta, *data_, rows);
  if (l2_ > 0) g += l2_ * theta;
  return g;
}

std::optional<Vector> RegressionObjective::full_gradient(const Vector& theta) const {
  Vector g = kind_ == RegressionKind::kRidge ? ridge_gradient(theta, *data_)
                                             : logistic_gradient(theta, *data_);
  if (l2_ > 0) g += l2_ * theta;
  return g;
}

std::optional<double> RegressionObjective::loss(const Vector& theta) const {
  double f = kind_ == RegressionKind::kRidge ? ridge_loss(theta, *data_)
                                             : logistic_loss(theta, *data_);
  if (l2_ > 0) f += 0.5 * l2_ * theta.squaredNorm();
  return f;
}

double RegressionObjective::lipschitz_constant() const {
  const Matrix gram = data_->inputs.transpose() * data_->inputs / data_->size();
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
  const double scale = kind_ == RegressionKind::kRidge ? 2.0 : 0.25;
  return scale * top + l2_;
}

std::vector<std::shared_ptr<const Objective>> make_regression_objectives(
    RegressionKind kind, const std::vector<RegressionDataset>& datasets, double l2) {
  std::vector<std::shared_ptr<const Objective>> out;
  out.reserve(datasets.size());
  for (const auto& d : datasets) {
    out.push_back(std::make_shared<RegressionObjective>(
        kind, std::make_shared<const RegressionDataset>(d), l2));
  }
  return out;
}

CentralizedSolution centralized_solve(RegressionKind kind,
                                      const std::vector<RegressionDataset>& datasets,
                                      double l2) {
  if (datasets.empty()) throw InvalidArgument("centralized_solve: no data");
  const int dim = datasets.front().dim();
  const auto n = static_cast<double>(datasets.size());
  CentralizedSolution out;

  if (kind == RegressionKind::kRidge) {
    // Σ_i (2/n_i)(X_iᵀX_i θ − X_iᵀ t_i) + N·l2·θ = 0
    Matrix normal = Matrix::Zero(dim, dim);
    Vector rhs = Vector::Zero(dim);
    for (const auto& d : datasets) {
      const double w = 2.0 / d.size();
      normal += w * d.inputs.transpose() * d.inputs;
      rhs += w * d.inputs.transpose() * d.targets;
    }
    normal.diagonal().array() += n * l2;
    Eigen::FullPivLU<Matrix> lu(normal);
    if (lu.rank() < dim) {
      out.regularized = true;
      normal.diagonal().array() += 1e-12;
    }
    out.theta = normal.ldlt().solve(rhs);
    Vector residual = normal * out.theta - rhs;
    out.gradient_norm = residual.norm();
    return out;
  }

  auto total_loss = [&](const Vector& th) {
    double f = 0.5 * n * l2 * th.squaredNorm();
    for (const auto& d : datasets) f += logistic_loss(th, d);
    return f;
  };
  auto total_gradient = [&](const Vector& th) {
    Vector g = n * l2 * th;
    for (const auto& d : datasets) g += logistic_gradient(th, d);
    return g;
  };

  Vector theta = Vector::Zero(dim);
  double step = 1.0;
  double f = total_loss(theta);
  Vector g = total_gradient(theta);
  constexpr int kMaxIterations = 100'000;
  int it = 0;
  for (; it < kMaxIterations && g.norm() > 1e-10; ++it) {
    const double g2 = g.squaredNorm();
    bool accepted = false;
    Vector prev_theta = theta;
    Vector prev_g = g;
    while (!accepted && step > 1e-20) {
      Vector candidate = theta - step * g;
      const double fc = total_loss(candidate);
      if (fc <= f - 1e-4 * step * g2) {
        theta = std::move(candidate);
        f = fc;
        g = total_gradient(theta);
        accepted = true;
      } else if (std::abs(fc - f) <= 1e-12 * std::max(1.0, std::abs(f))) {
        // near the optimum the loss stops resolving the decrease; judge by the gradient
        Vector gc = total_gradient(candidate);
        if (gc.squaredNorm() < g2) {
          theta = std::move(candidate);
          f = fc;
          g = std::move(gc);
          accepted = true;
        }
      }
      if (!accepted) step *= 0.5;
    }
    if (!accepted) break;
    // Barzilai-Borwein trial step for the next iteration
    const Vector ds = theta - prev_theta;
    const Vector dg = g - prev_g;
    const double curvature = ds.dot(dg);
    step = curvature > 0 ? std::clamp(ds.squaredNorm() / curvature, 1e-10, 1e10) : 2.0 * step;
  }
  out.theta = theta;
  out.iterations = it;
  out.gradient_norm = g.norm();
  return out;
}

void write_datasets_csv(std::ostream& os, const std::vector<RegressionDataset>& datasets) {
  if (datasets.empty()) return;
  const int dim = datasets.front().dim();
  for (int c = 0; c < dim; ++c) os << 'x' << c << ',';
  os << "target,agent\n";
  os << std::setprecision(17);
  for (const auto& d : datasets) {
    for (int m = 0; m < d.size(); ++m) {
      for (int c = 0; c < dim; ++c) os << d.inputs(m, c) << ',';
      os << d.targets(m) << ',' << d.owner << '\n';
    }
  }
}

std::vector<RegressionDataset> read_datasets_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("dataset csv: missing header");
  int columns = 1;
  for (char ch : line) columns += ch == ',';
  const int dim = columns - 2;
  if (dim < 1) throw InvalidArgument("dataset csv: header needs features, target, agent");

  std::map<int, std::vector<std::vector<double>>> rows_by_agent;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<int>(values.size()) != columns) {
      throw InvalidArgument("dataset csv: row has " + std::to_string(values.size()) +
                            " cells, expected " + std::to_string(columns));
    }
    rows_by_agent[static_cast<int>(values.back())].push_back(std::move(values));
  }
  std::vector<RegressionDataset> out;
  for (auto& [agent, rows] : rows_by_agent) {
    RegressionDataset d;
    d.owner = agent;
    d.inputs.resize(static_cast<Eigen::Index>(rows.size()), dim);
    d.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t m = 0; m < rows.size(); ++m) {
      for (int c = 0; c < dim; ++c) d.inputs(static_cast<Eigen::Index>(m), c) = rows[m][c];
      d.targets(static_cast<Eigen::Index>(m)) = rows[m][dim];
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace decadmm
