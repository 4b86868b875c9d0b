#include "decadmm/baselines.hpp"

#include <cmath>

namespace decadmm {

namespace {

int common_dim(const std::vector<std::shared_ptr<const Objective>>& objectives, int n) {
  if (static_cast<int>(objectives.size()) != n) {
    throw InvalidArgument("need one objective per agent");
  }
  const int dim = objectives.front()->dim();
  for (const auto& obj : objectives) {
    if (obj->dim() != dim) throw DimensionMismatch("objectives disagree on dimension");
  }
  return dim;
}

std::vector<Rng> agent_streams(std::uint64_t seed, int n) {
  std::vector<Rng> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(make_rng(seed, Stream::kSampling, i));
  return out;
}

void check_step(double step_size) {
  if (!(step_size > 0) || !std::isfinite(step_size)) {
    throw InvalidArgument("step_size must be > 0");
  }
}

}  // namespace

void GossipState::validate() const {
  const auto n = static_cast<Eigen::Index>(thetas.size());
  if (n == 0) throw InvalidArgument("gossip state has no agents");
  if (mixing.rows() != n || mixing.cols() != n) {
    throw DimensionMismatch("mixing matrix does not match the agent count");
  }
  check_step(step_size);
  for (const auto& t : thetas) require_same_dim(t, thetas.front(), "gossip state");
}

Vector GradientSource::operator()(const Objective& obj, const Vector& theta, Rng& rng) const {
  if (batch_size < 0) throw InvalidArgument("batch_size must be >= 0");
  if (batch_size == 0) {
    if (auto g = obj.full_gradient(theta)) return *g;
    return obj.stochastic_gradient(theta, 1, rng);
  }
  const auto n = obj.dataset_size();
  if (n && batch_size >= *n) return *obj.full_gradient(theta);
  return obj.stochastic_gradient(theta, batch_size, rng);
}

std::vector<Vector> dgd_round(const GossipState& state, std::span<const Vector> grads) {
  state.validate();
  const auto n = state.thetas.size();
  if (grads.size() != n) throw InvalidArgument("dgd_round: one gradient per agent");
  std::vector<Vector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    require_same_dim(grads[i], state.thetas[i], "dgd_round");
    Vector mixed = Vector::Zero(state.thetas[i].size());
    for (std::size_t j = 0; j < n; ++j) {
      const double w = state.mixing(i, j);
      if (w != 0.0) mixed += w * state.thetas[j];
    }
    out[i] = mixed - state.step_size * grads[i];
  }
  return out;
}

std::vector<Vector> extra_round(const GossipState& state, std::span<const Vector> prev_thetas,
                                std::span<const Vector> grads, std::span<const Vector> prev_grads) {
  state.validate();
  const auto n = state.thetas.size();
  if (prev_thetas.size() != n || grads.size() != n || prev_grads.size() != n) {
    throw InvalidArgument("extra_round: one previous iterate and gradient pair per agent");
  }
  std::vector<Vector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector cur = state.thetas[i];
    Vector prev = 0.5 * prev_thetas[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double w = state.mixing(i, j);
      if (w == 0.0) continue;
      cur += w * state.thetas[j];
      prev += 0.5 * w * prev_thetas[j];
    }
    out[i] = cur - prev - state.step_size * (grads[i] - prev_grads[i]);
  }
  return out;
}

Vector igd_step(const Vector& theta, const Vector& grad, double step_size) {
  require_same_dim(theta, grad, "igd_step");
  return theta - step_size * grad;
}

DgdSolver::DgdSolver(const NetworkGraph& graph,
                     std::vector<std::shared_ptr<const Objective>> objectives, double step_size,
                     GradientSource source, std::uint64_t seed)
    : objectives_(std::move(objectives)), source_(source) {
  const int dim = common_dim(objectives_, graph.n);
  state_.thetas.assign(graph.n, Vector::Zero(dim));
  state_.mixing = metropolis_weights(graph);
  state_.step_size = step_size;
  state_.validate();
  sampling_ = agent_streams(seed, graph.n);
  per_round_ = 2 * static_cast<std::uint64_t>(graph.edges.size()) * dim;
}

void DgdSolver::step() {
  std::vector<Vector> grads;
  grads.reserve(objectives_.size());
  for (std::size_t i = 0; i < objectives_.size(); ++i) {
    grads.push_back(source_(*objectives_[i], state_.thetas[i], sampling_[i]));
  }
  state_.thetas = dgd_round(state_, grads);
  comm_scalars_ += per_round_;
  ++k_;
}

ExtraSolver::ExtraSolver(const NetworkGraph& graph,
                         std::vector<std::shared_ptr<const Objective>> objectives,
                         double step_size, GradientSource source, std::uint64_t seed)
    : objectives_(std::move(objectives)), source_(source) {
  const int dim = common_dim(objectives_, graph.n);
  state_.thetas.assign(graph.n, Vector::Zero(dim));
  state_.mixing = metropolis_weights(graph);
  state_.step_size = step_size;
  state_.validate();
  sampling_ = agent_streams(seed, graph.n);
  per_round_ = 2 * static_cast<std::uint64_t>(graph.edges.size()) * dim;
}

std::vector<Vector> ExtraSolver::gradients() {
  std::vector<Vector> grads;
  grads.reserve(objectives_.size());
  for (std::size_t i = 0; i < objectives_.size(); ++i) {
    grads.push_back(source_(*objectives_[i], state_.thetas[i], sampling_[i]));
  }
  return grads;
}

void ExtraSolver::step() {
  auto grads = gradients();
  std::vector<Vector> next;
  if (k_ == 0) {
    next = dgd_round(state_, grads);
  } else {
    next = extra_round(state_, prev_thetas_, grads, prev_grads_);
  }
  prev_thetas_ = std::move(state_.thetas);
  prev_grads_ = std::move(grads);
  state_.thetas = std::move(next);
  comm_scalars_ += per_round_;
  ++k_;
}

IgdSolver::IgdSolver(const NetworkGraph& graph,
                     std::vector<std::shared_ptr<const Objective>> objectives, double step_size,
                     GradientSource source, std::uint64_t seed)
    : cycle_(graph.cycle), objectives_(std::move(objectives)), step_size_(step_size),
      source_(source) {
  if (!graph.has_valid_cycle()) throw InvalidArgument("graph has no valid token cycle");
  check_step(step_size);
  const int dim = common_dim(objectives_, graph.n);
  theta_ = Vector::Zero(dim);
  held_.assign(graph.n, Vector::Zero(dim));
  sampling_ = agent_streams(seed, graph.n);
}

void IgdSolver::step() {
  const int agent = cycle_[static_cast<std::size_t>(k_ % static_cast<std::int64_t>(cycle_.size()))];
  const Vector g = source_(*objectives_[agent], theta_, sampling_[agent]);
  theta_ = igd_step(theta_, g, step_size_);
  held_[agent] = theta_;
  comm_scalars_ += static_cast<std::uint64_t>(theta_.size());
  ++k_;
}

}  // namespace decadmm
