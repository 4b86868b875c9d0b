#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "decadmm/common.hpp"
#include "decadmm/objective.hpp"

namespace decadmm {

/// Discrete environment state; each environment documents which of the
/// components it uses.
using State = std::array<int, 4>;

struct Transition {
  State next{};
  double loss = 0.0;  // g(s, a); rewards are −loss
};

/// Finite-action MDP seen by one agent. Stateless: every draw comes from the
/// caller's engine, so one instance may be shared.
class Mdp {
 public:
  virtual ~Mdp() = default;

  virtual int n_actions() const = 0;
  virtual int feature_dim() const = 0;
  virtual int horizon() const = 0;
  virtual double discount() const = 0;

  virtual State initial_state(Rng& rng) const = 0;
  virtual Transition step(const State& s, int action, Rng& rng) const = 0;

  /// Row a holds φ(s, a).
  virtual Matrix features(const State& s) const = 0;

  /// Short label for trajectory dumps.
  virtual std::string state_label(const State& s) const { return std::to_string(s[0]); }
};

class StaleTrajectory : public Error {
 public:
  using Error::Error;
};

struct Trajectory {
  std::vector<State> states;   // T+1
  std::vector<int> actions;    // T
  std::vector<double> losses;  // T
  int agent = 0;
  Vector theta;                // policy parameter the trajectory was drawn under

  int length() const { return static_cast<int>(actions.size()); }
  /// Undiscounted sum of rewards.
  double total_reward() const;
};

/// Softmax over logits θᵀφ(s, a), max-subtracted.
Vector policy_probs(const Vector& theta, const Matrix& phi);
Vector policy_probs(const Vector& theta, const State& s, const Mdp& mdp);

/// φ(s, a) − Σ_u π(u|s) φ(s, u)
Vector grad_log_policy(const Vector& theta, const State& s, int action, const Mdp& mdp);

int sample_action(const Vector& probs, Rng& rng);

struct SoftmaxPolicy {
  Vector theta;
  std::shared_ptr<const Mdp> mdp;

  Vector probs(const State& s) const { return policy_probs(theta, s, *mdp); }
  int act(const State& s, Rng& rng) const { return sample_action(probs(s), rng); }
};

Trajectory sample_trajectory(const Mdp& mdp, const Vector& theta, int horizon, Rng& rng,
                             int agent = 0);

/// [Σ_t ∇log π(a_t|s_t)]·[Σ_t α^t g(s_t, a_t)]. Throws StaleTrajectory when
/// the trajectory was drawn under a different θ.
Vector reinforce_gradient(const Trajectory& traj, const Vector& theta, const Mdp& mdp);

/// Mean of `batch` REINFORCE samples over fresh trajectories.
Vector minibatch_pg(const Vector& theta, const Mdp& mdp, int batch, int horizon, Rng& rng);

/// J_i(θ) behind a REINFORCE oracle, so the ADMM engine and the baselines
/// can consume an environment like any other objective. `loss_scale`
/// multiplies the per-step loss seen by the optimizer only.
class PolicyObjective final : public Objective {
 public:
  explicit PolicyObjective(std::shared_ptr<const Mdp> mdp, double loss_scale = 1.0);

  int dim() const override { return mdp_->feature_dim(); }
  Vector stochastic_gradient(const Vector& theta, int batch_size, Rng& rng) const override;

  const Mdp& mdp() const { return *mdp_; }
  std::shared_ptr<const Mdp> mdp_ptr() const { return mdp_; }
  double loss_scale() const { return loss_scale_; }

  /// Undiscounted reward of one fresh episode under θ.
  double episode_reward(const Vector& theta, Rng& rng) const;

 private:
  std::shared_ptr<const Mdp> mdp_;
  double loss_scale_;
};

/// Fully specified finite MDP with one-hot (s, a) features. Used as an
/// enumerable reference environment.
class TabularMdp final : public Mdp {
 public:
  /// transition[s][a][s'] probabilities, loss[s][a], initial[s].
  TabularMdp(std::vector<std::vector<std::vector<double>>> transition,
             std::vector<std::vector<double>> loss, std::vector<double> initial, int horizon,
             double discount);

  int n_states() const { return static_cast<int>(initial_.size()); }
  int n_actions() const override { return n_actions_; }
  int feature_dim() const override { return n_states() * n_actions_; }
  int horizon() const override { return horizon_; }
  double discount() const override { return discount_; }
  State initial_state(Rng& rng) const override;
  Transition step(const State& s, int action, Rng& rng) const override;
  Matrix features(const State& s) const override;

  double transition_prob(int s, int a, int next) const { return transition_[s][a][next]; }
  double loss(int s, int a) const { return loss_[s][a]; }
  double initial_prob(int s) const { return initial_[s]; }

 private:
  std::vector<std::vector<std::vector<double>>> transition_;
  std::vector<std::vector<double>> loss_;
  std::vector<double> initial_;
  int n_actions_ = 0;
  int horizon_ = 1;
  double discount_ = 1.0;
};

// Localization -------------------------------------------------------------

struct LocalizationConfig {
  int grid_size = 20;
  int n_agents = 5;
  int target_x = 10;
  int target_y = 10;
  double d0 = 1.0;           // success radius, cells
  double base_reward = 1.0;  // r_i in the homogeneous mode
  bool heterogeneous = false;
  double l0 = 20.7;
  double nu = 3.04;
  double p0 = 1.0;
  double rss_noise = 1e-3;   // std of e_i
  bool oracle_state = true;  // feed true positions instead of RSS estimates
  int horizon = 50;
  double discount = 0.99;

  void validate() const;
};

/// Grid walk toward a fixed target. State = (x, y, bx, by): true position
/// and the bucketed sign of the observed displacement to the target.
/// Actions: 0 north (y+1), 1 south (y−1), 2 west (x−1), 3 east (x+1).
/// Features are one-hot over (9 displacement buckets × 4 actions).
class LocalizationEnv final : public Mdp {
 public:
  LocalizationEnv(LocalizationConfig cfg, int agent);

  static constexpr int kActions = 4;
  static constexpr int kBuckets = 9;

  int n_actions() const override { return kActions; }
  int feature_dim() const override { return kBuckets * kActions; }
  int horizon() const override { return cfg_.horizon; }
  double discount() const override { return cfg_.discount; }
  State initial_state(Rng& rng) const override;
  Transition step(const State& s, int action, Rng& rng) const override;
  Matrix features(const State& s) const override;
  std::string state_label(const State& s) const override;

  double priority() const { return priority_; }
  double distance(int x, int y) const;
  /// g_i at position (x, y) expressed as a reward.
  double reward_at(int x, int y) const;
  /// Received power at distance d, without noise.
  double received_power(double d) const;
  /// Distance estimate from a power reading by inverting the path-loss model.
  double invert_power(double power) const;
  /// Side of the square of start cells for this agent.
  int start_side() const { return start_side_; }

 private:
  State observe(int x, int y, Rng& rng) const;

  LocalizationConfig cfg_;
  int agent_ = 0;
  double priority_ = 1.0;
  int start_side_ = 0;
};

std::vector<std::shared_ptr<const Mdp>> make_localization_env(const LocalizationConfig& cfg);

// Resource management ------------------------------------------------------

struct ResourceConfig {
  int capacity = 6;            // C
  double arrival_rate = 3.0;   // d
  double workload_mean = 1.0;  // r, in intervals
  double h0 = 4.0;             // request initiation cost
  double h1 = 2.0;             // holding cost per idle unit
  double h2 = 2.0;             // price per acquired unit
  double h3 = 3.0;             // listed with the preset; not used by the reward
  double price = 5.0;          // p, paid per served task
  int intervals = 30;
  double discount = 0.99;

  void validate() const;
};

/// State = (idle units s, busy units b). Action = units requested, 0..C.
/// Per interval: pool = min(s+a, C); w ~ Poisson(d) tasks arrive and
/// min(w, pool) are served, each occupying one unit until it completes
/// (probability 1 − e^{−1/r} per interval) and is released. An interval
/// with neither arrivals nor completions changes nothing and costs h1·s.
/// Features are one-hot over (s × a).
class ResourceEnv final : public Mdp {
 public:
  explicit ResourceEnv(ResourceConfig cfg);

  int n_actions() const override { return cfg_.capacity + 1; }
  int feature_dim() const override { return (cfg_.capacity + 1) * (cfg_.capacity + 1); }
  int horizon() const override { return cfg_.intervals; }
  double discount() const override { return cfg_.discount; }
  State initial_state(Rng& rng) const override;
  Transition step(const State& s, int action, Rng& rng) const override;
  Matrix features(const State& s) const override;

  /// Deterministic core of `step` for given arrivals and completions.
  Transition apply(const State& s, int action, int arrivals, int completions) const;
  double completion_prob() const;
  const ResourceConfig& config() const { return cfg_; }

 private:
  ResourceConfig cfg_;
};

std::shared_ptr<const ResourceEnv> make_resource_env(const ResourceConfig& cfg);

/// step,state,action,reward
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Mdp& mdp);

}  // namespace decadmm
