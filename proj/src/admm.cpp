#include "decadmm/admm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

#include "decadmm/metrics.hpp"

namespace decadmm {

void HyperParams::validate() const {
  if (!(rho > 0)) throw InvalidArgument("rho must be > 0");
  if (!(tau >= 0)) throw InvalidArgument("tau must be >= 0");
  if (!(gamma > 0)) throw InvalidArgument("gamma must be > 0");
  if (!(eta_bar >= 0 && eta_bar < 1)) throw InvalidArgument("eta_bar must lie in [0, 1)");
  if (!(iota_sq > 0)) throw InvalidArgument("iota_sq must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
}

double adaptive_eta(const Vector& mu, const Vector& g, double eta_bar, double iota_sq,
                    int batch_size) {
  require_same_dim(mu, g, "adaptive_eta");
  if (!(eta_bar >= 0 && eta_bar < 1)) throw InvalidArgument("eta_bar must lie in [0, 1)");
  if (!(iota_sq > 0)) throw InvalidArgument("iota_sq must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");

  const double deviation_sq = (mu - g).squaredNorm();
  const double bound = iota_sq / batch_size;
  if (eta_bar * eta_bar * deviation_sq <= bound) return eta_bar;

  double eta = std::sqrt(bound) / std::sqrt(deviation_sq);
  // the closed form can land one ulp above the bound after rounding
  while (eta > 0 && eta * eta * deviation_sq > bound) eta = std::nextafter(eta, 0.0);
  return eta;
}

Vector ema_update(const Vector& mu, const Vector& g, double eta) {
  require_same_dim(mu, g, "ema_update");
  if (!(eta >= 0 && eta < 1)) throw InvalidArgument("ema_update: eta must lie in [0, 1)");
  return eta * mu + (1.0 - eta) * g;
}

Vector primal_update(const AgentState& state, const Token& token, const HyperParams& hp) {
  require_same_dim(state.theta, state.lambda, "primal_update");
  require_same_dim(state.theta, token.z, "primal_update");
  require_same_dim(state.theta, token.mu, "primal_update");
  return (hp.rho * token.z + state.lambda + hp.tau * state.theta - token.mu) / (hp.rho + hp.tau);
}

Vector dual_update(const Vector& lambda, const Vector& z, const Vector& theta_new,
                   const HyperParams& hp) {
  require_same_dim(lambda, z, "dual_update");
  require_same_dim(lambda, theta_new, "dual_update");
  return lambda + hp.rho * hp.gamma * (z - theta_new);
}

Vector token_z_update(const Vector& z, const Vector& theta_old, const Vector& theta_new,
                      const Vector& lambda_old, const Vector& lambda_new, double rho, int n) {
  require_same_dim(z, theta_old, "token_z_update");
  require_same_dim(z, theta_new, "token_z_update");
  require_same_dim(z, lambda_old, "token_z_update");
  require_same_dim(z, lambda_new, "token_z_update");
  if (n < 1) throw InvalidArgument("token_z_update: n must be >= 1");
  return z + ((theta_new - lambda_new / rho) - (theta_old - lambda_old / rho)) / n;
}

std::string to_string(AdmmVariant v) {
  switch (v) {
    case AdmmVariant::kAdaptive:
      return "asi-admm";
    case AdmmVariant::kStochastic:
      return "si-admm";
    case AdmmVariant::kFullBatch:
      return "i-admm";
  }
  return "unknown";
}

DescentCoefficients descent_coefficients(const HyperParams& hp, double lipschitz, int n) {
  DescentCoefficients c;
  c.chi = (hp.rho - lipschitz + 2.0 * hp.tau + 1.0) / 2.0 - 2.0 * hp.rho / hp.gamma;
  c.phi = n * hp.rho / 2.0 - 2.0 * hp.rho * n * n / hp.gamma;
  return c;
}

DescentMonitor::DescentMonitor(DescentCoefficients coeffs, double slack, double rel_tol)
    : coeffs_(coeffs), slack_(slack), rel_tol_(rel_tol) {
  if (!(slack >= 0)) throw InvalidArgument("slack must be >= 0");
  if (!(rel_tol >= 0)) throw InvalidArgument("rel_tol must be >= 0");
}

bool DescentMonitor::observe(double v_before, double v_after, const VisitInfo& info) {
  ++observed_;
  if (!std::isfinite(v_before) || !std::isfinite(v_after)) {
    ++non_finite_;
    worst_excess_ = std::numeric_limits<double>::infinity();
    return false;
  }
  const double rhs =
      v_before + slack_ - coeffs_.chi * info.theta_step_sq - coeffs_.phi * info.z_step_sq;
  const double excess = v_after - rhs;
  worst_excess_ = std::max(worst_excess_, excess);
  // rounding in V itself
  const double tol = rel_tol_ * std::max({1.0, std::abs(v_before), std::abs(v_after)});
  const bool ok = excess <= tol;
  if (ok) ++holds_;
  return ok;
}

double DescentMonitor::hold_fraction() const {
  return observed_ == 0 ? 1.0 : static_cast<double>(holds_) / static_cast<double>(observed_);
}

IncrementalAdmm::IncrementalAdmm(NetworkGraph graph,
                                 std::vector<std::shared_ptr<const Objective>> objectives,
                                 HyperParams hp, AdmmVariant variant, std::uint64_t seed)
    : graph_(std::move(graph)),
      objectives_(std::move(objectives)),
      hp_(hp),
      variant_(variant),
      n_(graph_.n) {
  hp_.validate();
  if (!graph_.has_valid_cycle()) throw InvalidArgument("graph has no valid token cycle");
  if (static_cast<int>(objectives_.size()) != n_) {
    throw InvalidArgument("need one objective per agent");
  }
  dim_ = objectives_.front()->dim();
  for (const auto& obj : objectives_) {
    if (obj->dim() != dim_) throw DimensionMismatch("objectives disagree on dimension");
    if (variant_ == AdmmVariant::kFullBatch && !obj->full_gradient(Vector::Zero(dim_))) {
      throw InvalidArgument("i-admm needs objectives with an exact local gradient");
    }
  }
  agents_.assign(n_, AgentState::zeros(dim_));
  token_ = Token::zeros(dim_);
  sampling_.reserve(n_);
  for (int i = 0; i < n_; ++i) sampling_.push_back(make_rng(seed, Stream::kSampling, i));
}

std::uint64_t IncrementalAdmm::scalars_per_hop() const {
  const auto m = static_cast<std::uint64_t>(dim_);
  return variant_ == AdmmVariant::kAdaptive ? 2 * m : m;
}

Vector IncrementalAdmm::draw_gradient(int agent, int* effective_batch) {
  const auto& obj = *objectives_[agent];
  const auto local_size = obj.dataset_size();
  // a batch covering the whole local set is the exact gradient
  const bool full = variant_ == AdmmVariant::kFullBatch ||
                    (local_size && hp_.batch_size >= *local_size);
  if (full) {
    *effective_batch = local_size.value_or(hp_.batch_size);
    return *obj.full_gradient(agents_[agent].theta);
  }
  *effective_batch = hp_.batch_size;
  return obj.stochastic_gradient(agents_[agent].theta, hp_.batch_size, sampling_[agent]);
}

VisitInfo IncrementalAdmm::visit() {
  VisitInfo info;
  info.k = k_;
  const int agent = graph_.cycle[static_cast<std::size_t>(k_ % n_)];
  info.agent = agent;

  int batch = hp_.batch_size;
  const Vector grad = draw_gradient(agent, &batch);
  if (grad.size() != dim_) throw DimensionMismatch("objective returned a wrong-size gradient");
  if (!grad.allFinite()) {
    throw Error("non-finite gradient at k=" + std::to_string(k_) + "; the iterates diverged");
  }

  const double eta_cap = variant_ == AdmmVariant::kAdaptive ? hp_.eta_bar : 0.0;
  const double eta = adaptive_eta(token_.mu, grad, eta_cap, hp_.iota_sq, batch);
  info.eta = eta;
  info.eta_lhs = eta * eta * (token_.mu - grad).squaredNorm();
  info.eta_rhs = hp_.iota_sq / batch;
  if (info.eta_lhs > info.eta_rhs) {
    ++eta_violations_;
    throw Error("adaptive eta bound violated at k=" + std::to_string(k_));
  }

  Token next{token_.z, ema_update(token_.mu, grad, eta)};
  AgentState& state = agents_[agent];
  Vector theta_new = primal_update(state, next, hp_);
  Vector lambda_new = dual_update(state.lambda, token_.z, theta_new, hp_);
  next.z = token_z_update(token_.z, state.theta, theta_new, state.lambda, lambda_new, hp_.rho, n_);

  info.theta_step_sq = (theta_new - state.theta).squaredNorm();
  info.z_step_sq = (next.z - token_.z).squaredNorm();

  state.theta = std::move(theta_new);
  state.lambda = std::move(lambda_new);
  token_ = std::move(next);
  comm_scalars_ += scalars_per_hop();
  ++k_;
  return info;
}

std::vector<Vector> IncrementalAdmm::thetas() const {
  std::vector<Vector> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a.theta);
  return out;
}

std::optional<double> IncrementalAdmm::lyapunov() const {
  std::vector<Vector> lambdas;
  lambdas.reserve(agents_.size());
  for (const auto& a : agents_) lambdas.push_back(a.lambda);
  try {
    return lyapunov_value(thetas(), lambdas, token_.z, hp_.rho, objectives_);
  } catch (const NotAvailable&) {
    return std::nullopt;
  }
}

Vector IncrementalAdmm::recomputed_z() const {
  Vector acc = Vector::Zero(dim_);
  for (const auto& a : agents_) acc += a.theta - a.lambda / hp_.rho;
  return acc / n_;
}

namespace {

constexpr const char* kCheckpointMagic = "decadmm-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_vector(std::ostream& os, const Vector& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) os << (j ? " " : "") << v(j);
  os << '\n';
}

Vector read_vector(std::istream& is, int dim) {
  Vector v(dim);
  for (int j = 0; j < dim; ++j) {
    if (!(is >> v(j))) throw InvalidArgument("checkpoint: truncated vector");
  }
  return v;
}

}  // namespace

void IncrementalAdmm::save_checkpoint(std::ostream& os) const {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << to_string(variant_) << ' ' << n_ << ' ' << dim_ << ' ' << k_ << ' ' << comm_scalars_
     << '\n';
  os << std::setprecision(17);
  for (const auto& a : agents_) {
    write_vector(os, a.theta);
    write_vector(os, a.lambda);
  }
  write_vector(os, token_.z);
  write_vector(os, token_.mu);
  for (const auto& rng : sampling_) os << rng << '\n';
}

void IncrementalAdmm::load_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kCheckpointMagic) {
    throw InvalidArgument("checkpoint: not a decadmm checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw InvalidArgument("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string variant;
  int n = 0, dim = 0;
  std::int64_t k = 0;
  std::uint64_t comm = 0;
  if (!(is >> variant >> n >> dim >> k >> comm)) throw InvalidArgument("checkpoint: bad header");
  if (variant != to_string(variant_) || n != n_ || dim != dim_) {
    throw InvalidArgument("checkpoint: built for " + variant + " n=" + std::to_string(n) +
                          " m=" + std::to_string(dim) + ", engine differs");
  }
  std::vector<AgentState> agents(n_);
  for (auto& a : agents) {
    a.theta = read_vector(is, dim_);
    a.lambda = read_vector(is, dim_);
  }
  Token token;
  token.z = read_vector(is, dim_);
  token.mu = read_vector(is, dim_);
  std::vector<Rng> sampling(n_);
  for (auto& rng : sampling) {
    if (!(is >> rng)) throw InvalidArgument("checkpoint: truncated rng state");
  }
  agents_ = std::move(agents);
  token_ = std::move(token);
  sampling_ = std::move(sampling);
  k_ = k;
  comm_scalars_ = comm;
}

}  // namespace decadmm
