#include "decadmm/rl.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace decadmm {

double Trajectory::total_reward() const {
  double acc = 0.0;
  for (double g : losses) acc -= g;
  return acc;
}

Vector policy_probs(const Vector& theta, const Matrix& phi) {
  if (phi.cols() != theta.size()) {
    throw DimensionMismatch("policy_probs: feature dimension " + std::to_string(phi.cols()) +
                            " vs theta " + std::to_string(theta.size()));
  }
  Vector logits = phi * theta;
  const double top = logits.maxCoeff();
  Vector p = (logits.array() - top).exp().matrix();
  p /= p.sum();
  return p;
}

Vector policy_probs(const Vector& theta, const State& s, const Mdp& mdp) {
  return policy_probs(theta, mdp.features(s));
}

Vector grad_log_policy(const Vector& theta, const State& s, int action, const Mdp& mdp) {
  if (action < 0 || action >= mdp.n_actions()) {
    throw InvalidArgument("grad_log_policy: action " + std::to_string(action) + " out of range");
  }
  const Matrix phi = mdp.features(s);
  const Vector p = policy_probs(theta, phi);
  return phi.row(action).transpose() - phi.transpose() * p;
}

int sample_action(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double acc = 0.0;
  for (Eigen::Index a = 0; a + 1 < probs.size(); ++a) {
    acc += probs(a);
    if (draw < acc) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size() - 1);
}

Trajectory sample_trajectory(const Mdp& mdp, const Vector& theta, int horizon, Rng& rng,
                             int agent) {
  if (horizon < 1) throw InvalidArgument("sample_trajectory: horizon must be >= 1");
  Trajectory traj;
  traj.agent = agent;
  traj.theta = theta;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  traj.losses.reserve(horizon);
  State s = mdp.initial_state(rng);
  traj.states.push_back(s);
  for (int t = 0; t < horizon; ++t) {
    const int a = sample_action(policy_probs(theta, s, mdp), rng);
    const Transition tr = mdp.step(s, a, rng);
    traj.actions.push_back(a);
    traj.losses.push_back(tr.loss);
    s = tr.next;
    traj.states.push_back(s);
  }
  return traj;
}

Vector reinforce_gradient(const Trajectory& traj, const Vector& theta, const Mdp& mdp) {
  if (traj.theta.size() != theta.size() || traj.theta != theta) {
    throw StaleTrajectory("reinforce_gradient: trajectory was drawn under a different theta");
  }
  if (traj.states.size() != traj.actions.size() + 1 ||
      traj.losses.size() != traj.actions.size()) {
    throw InvalidArgument("reinforce_gradient: inconsistent trajectory lengths");
  }
  Vector score = Vector::Zero(theta.size());
  double ret = 0.0;
  double weight = 1.0;
  for (int t = 0; t < traj.length(); ++t) {
    score += grad_log_policy(theta, traj.states[t], traj.actions[t], mdp);
    ret += weight * traj.losses[t];
    weight *= mdp.discount();
  }
  return score * ret;
}

Vector minibatch_pg(const Vector& theta, const Mdp& mdp, int batch, int horizon, Rng& rng) {
  if (batch < 1) throw InvalidArgument("minibatch_pg: batch must be >= 1");
  Vector acc = Vector::Zero(theta.size());
  for (int m = 0; m < batch; ++m) {
    acc += reinforce_gradient(sample_trajectory(mdp, theta, horizon, rng), theta, mdp);
  }
  return acc / batch;
}

PolicyObjective::PolicyObjective(std::shared_ptr<const Mdp> mdp, double loss_scale)
    : mdp_(std::move(mdp)), loss_scale_(loss_scale) {
  if (!mdp_) throw InvalidArgument("PolicyObjective: null environment");
  if (!(loss_scale > 0)) throw InvalidArgument("loss_scale must be > 0");
}

Vector PolicyObjective::stochastic_gradient(const Vector& theta, int batch_size, Rng& rng) const {
  return loss_scale_ * minibatch_pg(theta, *mdp_, batch_size, mdp_->horizon(), rng);
}

double PolicyObjective::episode_reward(const Vector& theta, Rng& rng) const {
  return sample_trajectory(*mdp_, theta, mdp_->horizon(), rng).total_reward();
}

// TabularMdp ---------------------------------------------------------------

TabularMdp::TabularMdp(std::vector<std::vector<std::vector<double>>> transition,
                       std::vector<std::vector<double>> loss, std::vector<double> initial,
                       int horizon, double discount)
    : transition_(std::move(transition)),
      loss_(std::move(loss)),
      initial_(std::move(initial)),
      horizon_(horizon),
      discount_(discount) {
  const auto ns = initial_.size();
  if (ns == 0 || transition_.size() != ns || loss_.size() != ns) {
    throw InvalidArgument("TabularMdp: state counts disagree");
  }
  n_actions_ = static_cast<int>(loss_.front().size());
  if (n_actions_ < 1) throw InvalidArgument("TabularMdp: no actions");
  for (std::size_t s = 0; s < ns; ++s) {
    if (static_cast<int>(loss_[s].size()) != n_actions_ ||
        static_cast<int>(transition_[s].size()) != n_actions_) {
      throw InvalidArgument("TabularMdp: action counts disagree");
    }
    for (const auto& row : transition_[s]) {
      if (row.size() != ns) throw InvalidArgument("TabularMdp: transition row size");
    }
  }
  if (horizon_ < 1) throw InvalidArgument("TabularMdp: horizon must be >= 1");
  if (!(discount_ > 0 && discount_ <= 1)) throw InvalidArgument("TabularMdp: discount in (0, 1]");
}

namespace {

int draw_index(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (draw < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace

State TabularMdp::initial_state(Rng& rng) const { return {draw_index(initial_, rng), 0, 0, 0}; }

Transition TabularMdp::step(const State& s, int action, Rng& rng) const {
  return {{draw_index(transition_[s[0]][action], rng), 0, 0, 0}, loss_[s[0]][action]};
}

Matrix TabularMdp::features(const State& s) const {
  Matrix phi = Matrix::Zero(n_actions_, feature_dim());
  for (int a = 0; a < n_actions_; ++a) phi(a, s[0] * n_actions_ + a) = 1.0;
  return phi;
}

// Localization -------------------------------------------------------------

void LocalizationConfig::validate() const {
  if (grid_size < 2) throw InvalidArgument("grid_size must be >= 2");
  if (n_agents < 1) throw InvalidArgument("n_agents must be >= 1");
  if (target_x < 0 || target_x >= grid_size || target_y < 0 || target_y >= grid_size) {
    throw InvalidArgument("target must lie inside the grid");
  }
  if (!(d0 > 0)) throw InvalidArgument("d0 must be > 0");
  if (!(base_reward > 0)) throw InvalidArgument("base_reward must be > 0");
  if (!(l0 > 0) || !(nu > 0) || !(p0 > 0)) throw InvalidArgument("channel l0, nu, p0 must be > 0");
  if (!(rss_noise >= 0)) throw InvalidArgument("rss_noise must be >= 0");
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (!(discount > 0 && discount < 1)) throw InvalidArgument("discount must lie in (0, 1)");
}

LocalizationEnv::LocalizationEnv(LocalizationConfig cfg, int agent)
    : cfg_(cfg), agent_(agent) {
  cfg_.validate();
  if (agent < 0 || agent >= cfg_.n_agents) throw InvalidArgument("agent index out of range");
  if (cfg_.heterogeneous) {
    priority_ = cfg_.base_reward * (agent + 1);
    const int side = (cfg_.grid_size * (agent + 1) + cfg_.n_agents - 1) / cfg_.n_agents;
    start_side_ = std::max(1, side);
  } else {
    priority_ = cfg_.base_reward;
    start_side_ = cfg_.grid_size;
  }
}

double LocalizationEnv::distance(int x, int y) const {
  return std::hypot(static_cast<double>(x - cfg_.target_x), static_cast<double>(y - cfg_.target_y));
}

double LocalizationEnv::reward_at(int x, int y) const {
  const double d = distance(x, y);
  return d < cfg_.d0 ? priority_ : -d;
}

double LocalizationEnv::received_power(double d) const {
  return cfg_.l0 * cfg_.p0 / std::pow(d, cfg_.nu);
}

double LocalizationEnv::invert_power(double power) const {
  const double floor = 1e-12;
  return std::pow(cfg_.l0 * cfg_.p0 / std::max(power, floor), 1.0 / cfg_.nu);
}

namespace {

int sign_bucket(double v) {
  if (v > 0.5) return 2;
  if (v < -0.5) return 0;
  return 1;
}

}  // namespace

State LocalizationEnv::observe(int x, int y, Rng& rng) const {
  double dx = cfg_.target_x - x;
  double dy = cfg_.target_y - y;
  if (!cfg_.oracle_state && (dx != 0 || dy != 0)) {
    const double d = std::hypot(dx, dy);
    std::normal_distribution<double> noise(0.0, cfg_.rss_noise);
    const double power = received_power(d) + (cfg_.rss_noise > 0 ? noise(rng) : 0.0);
    const double scale = invert_power(power) / d;
    dx *= scale;
    dy *= scale;
  }
  return {x, y, sign_bucket(dx), sign_bucket(dy)};
}

State LocalizationEnv::initial_state(Rng& rng) const {
  std::uniform_int_distribution<int> cell(0, start_side_ - 1);
  const int x = cell(rng);
  const int y = cell(rng);
  return observe(x, y, rng);
}

Transition LocalizationEnv::step(const State& s, int action, Rng& rng) const {
  int x = s[0];
  int y = s[1];
  const double loss = -reward_at(x, y);
  switch (action) {
    case 0: ++y; break;
    case 1: --y; break;
    case 2: --x; break;
    case 3: ++x; break;
    default: throw InvalidArgument("localization: action out of range");
  }
  x = std::clamp(x, 0, cfg_.grid_size - 1);
  y = std::clamp(y, 0, cfg_.grid_size - 1);
  return {observe(x, y, rng), loss};
}

Matrix LocalizationEnv::features(const State& s) const {
  Matrix phi = Matrix::Zero(kActions, feature_dim());
  const int bucket = s[2] * 3 + s[3];
  for (int a = 0; a < kActions; ++a) phi(a, bucket * kActions + a) = 1.0;
  return phi;
}

std::string LocalizationEnv::state_label(const State& s) const {
  return std::to_string(s[0]) + ":" + std::to_string(s[1]);
}

std::vector<std::shared_ptr<const Mdp>> make_localization_env(const LocalizationConfig& cfg) {
  cfg.validate();
  std::vector<std::shared_ptr<const Mdp>> out;
  out.reserve(cfg.n_agents);
  for (int i = 0; i < cfg.n_agents; ++i) out.push_back(std::make_shared<LocalizationEnv>(cfg, i));
  return out;
}

// Resource management ------------------------------------------------------

void ResourceConfig::validate() const {
  if (capacity < 1) throw InvalidArgument("capacity must be >= 1");
  if (!(arrival_rate > 0)) throw InvalidArgument("arrival_rate must be > 0");
  if (!(workload_mean > 0)) throw InvalidArgument("workload_mean must be > 0");
  if (intervals < 1) throw InvalidArgument("intervals must be >= 1");
  if (!(discount > 0 && discount < 1)) throw InvalidArgument("discount must lie in (0, 1)");
}

ResourceEnv::ResourceEnv(ResourceConfig cfg) : cfg_(cfg) { cfg_.validate(); }

double ResourceEnv::completion_prob() const { return 1.0 - std::exp(-1.0 / cfg_.workload_mean); }

State ResourceEnv::initial_state(Rng& rng) const {
  std::uniform_int_distribution<int> idle(0, cfg_.capacity);
  return {idle(rng), 0, 0, 0};
}

Transition ResourceEnv::apply(const State& s, int action, int arrivals, int completions) const {
  if (action < 0 || action > cfg_.capacity) throw InvalidArgument("resource: action out of range");
  const int idle = s[0];
  const int busy = s[1];
  if (arrivals == 0 && completions == 0) return {s, cfg_.h1 * idle};

  const int pool = std::min(idle + action, cfg_.capacity);
  const int served = std::min(arrivals, pool);
  const int left = pool - served;
  double reward = -cfg_.h1 * idle - cfg_.h2 * std::max(pool - idle, 0) +
                  cfg_.price * std::max(pool - left, 0);
  if (action > 0) reward -= cfg_.h0;
  return {{left, busy - completions + served, 0, 0}, -reward};
}

Transition ResourceEnv::step(const State& s, int action, Rng& rng) const {
  std::poisson_distribution<int> arrivals(cfg_.arrival_rate);
  const int w = arrivals(rng);
  int done = 0;
  if (s[1] > 0) {
    std::binomial_distribution<int> complete(s[1], completion_prob());
    done = complete(rng);
  }
  return apply(s, action, w, done);
}

Matrix ResourceEnv::features(const State& s) const {
  const int na = n_actions();
  Matrix phi = Matrix::Zero(na, feature_dim());
  for (int a = 0; a < na; ++a) phi(a, s[0] * na + a) = 1.0;
  return phi;
}

std::shared_ptr<const ResourceEnv> make_resource_env(const ResourceConfig& cfg) {
  return std::make_shared<ResourceEnv>(cfg);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Mdp& mdp) {
  os << "step,state,action,reward\n";
  os << std::setprecision(17);
  for (int t = 0; t < traj.length(); ++t) {
    os << t << ',' << mdp.state_label(traj.states[t]) << ',' << traj.actions[t] << ','
       << -traj.losses[t] << '\n';
  }
}

}  // namespace decadmm
