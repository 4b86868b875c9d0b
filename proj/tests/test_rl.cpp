#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "decadmm/config.hpp"
#include "decadmm/rl.hpp"
#include "oracles.hpp"

using namespace decadmm;

namespace {

Vector randn(int dim, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (int j = 0; j < dim; ++j) v(j) = n(rng);
  return v;
}

// One state, fixed feature rows, one step.
class FixedFeatures final : public Mdp {
 public:
  FixedFeatures(Matrix phi, std::vector<double> losses) : phi_(std::move(phi)), losses_(std::move(losses)) {}
  int n_actions() const override { return static_cast<int>(phi_.rows()); }
  int feature_dim() const override { return static_cast<int>(phi_.cols()); }
  int horizon() const override { return 1; }
  double discount() const override { return 0.5; }
  State initial_state(Rng&) const override { return {}; }
  Transition step(const State& s, int a, Rng&) const override { return {s, losses_[a]}; }
  Matrix features(const State&) const override { return phi_; }

 private:
  Matrix phi_;
  std::vector<double> losses_;
};

double trace_variance(const std::vector<Vector>& xs) {
  Vector mean = Vector::Zero(xs.front().size());
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double v = 0;
  for (const auto& x : xs) v += (x - mean).squaredNorm();
  return v / static_cast<double>(xs.size() - 1);
}

}  // namespace

TEST_CASE("policy probabilities") {
  Matrix phi(3, 2);
  phi << 1, 0, 0, 1, 1, 1;
  const Vector p0 = policy_probs(Vector::Zero(2), phi);
  for (int a = 0; a < 3; ++a) CHECK(p0(a) == doctest::Approx(1.0 / 3));

  Matrix two(2, 1);
  two << std::log(3.0), 0.0;
  const Vector p = policy_probs(Vector::Ones(1), two);
  CHECK(p(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.25).epsilon(1e-12));

  // huge logits stay finite
  const Vector big = policy_probs(Vector::Constant(2, 1e4), phi);
  CHECK(big.allFinite());
  CHECK(big.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(policy_probs(Vector::Zero(3), phi), DimensionMismatch);
}

TEST_CASE("property: softmax is shift invariant and normalized") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const int na = 2 + t % 5, dim = 1 + t % 6;
    Matrix phi = Matrix::Random(na, dim);
    const Vector theta = randn(dim, rng, 3.0);
    const Vector c = randn(dim, rng);
    Matrix shifted = phi.rowwise() + c.transpose();
    const Vector p = policy_probs(theta, phi);
    REQUIRE(std::abs(p.sum() - 1.0) <= 1e-12);
    REQUIRE(p.minCoeff() >= 0.0);
    REQUIRE((policy_probs(theta, shifted) - p).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("score of centered features under a uniform policy") {
  Matrix phi(2, 2);
  phi << 1, -2, -1, 2;
  FixedFeatures mdp(phi, {0.0, 0.0});
  for (int a = 0; a < 2; ++a) {
    const Vector g = grad_log_policy(Vector::Zero(2), State{}, a, mdp);
    CHECK((g - phi.row(a).transpose()).norm() < 1e-15);
  }
  CHECK_THROWS_AS(grad_log_policy(Vector::Zero(2), State{}, 2, mdp), InvalidArgument);
}

TEST_CASE("property: score function has zero mean") {
  Rng rng(2);
  auto envs = make_localization_env(LocalizationConfig{});
  const auto res = make_resource_env(ResourceConfig{});
  for (int t = 0; t < 300; ++t) {
    const Mdp& mdp = t % 2 ? *envs[t % envs.size()] : static_cast<const Mdp&>(*res);
    const Vector theta = randn(mdp.feature_dim(), rng, 2.0);
    const State s = mdp.initial_state(rng);
    const Vector p = policy_probs(theta, s, mdp);
    REQUIRE(std::abs(p.sum() - 1.0) <= 1e-12);
    Vector acc = Vector::Zero(mdp.feature_dim());
    for (int a = 0; a < mdp.n_actions(); ++a) acc += p(a) * grad_log_policy(theta, s, a, mdp);
    REQUIRE(acc.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("grad log policy matches finite differences") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const int na = 2 + t % 4, dim = 3 + t % 5;
    FixedFeatures mdp(Matrix::Random(na, dim), std::vector<double>(na, 0.0));
    const Vector theta = randn(dim, rng);
    const int a = t % na;
    auto logp = [&](const Vector& th) { return std::log(policy_probs(th, State{}, mdp)(a)); };
    const Vector fd = oracle::fd_gradient(logp, theta, 1e-6);
    const Vector g = grad_log_policy(theta, State{}, a, mdp);
    REQUIRE((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("single-action deterministic chain is fixed by its start") {
  TabularMdp mdp({{{0.0, 1.0}}, {{1.0, 0.0}}}, {{1.0}, {2.0}}, {0.5, 0.5}, 6, 0.9);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Trajectory tr = sample_trajectory(mdp, Vector::Zero(2), 6, rng);
    for (int k = 0; k < 6; ++k) {
      CHECK(tr.states[k + 1][0] == 1 - tr.states[k][0]);
      CHECK(tr.actions[k] == 0);
    }
  }
}

TEST_CASE("episode length") {
  LocalizationConfig lc;
  CHECK(lc.horizon == 50);
  auto envs = make_localization_env(lc);
  Rng rng(5);
  const Trajectory tr = sample_trajectory(*envs[0], Vector::Zero(envs[0]->feature_dim()), 50, rng);
  CHECK(tr.length() == 50);
  CHECK(tr.states.size() == 51u);
  CHECK(make_preset("fig5-localization-5").localization.horizon == 50);
}

TEST_CASE("state visit frequencies follow the chain marginals") {
  TabularMdp mdp({{{0.8, 0.2}}, {{0.3, 0.7}}}, {{0.0}, {0.0}}, {0.9, 0.1}, 5, 0.9);
  // exact marginals of state 1
  std::vector<double> p1 = {0.1};
  for (int t = 0; t < 5; ++t) p1.push_back((1 - p1.back()) * 0.2 + p1.back() * 0.7);
  const int trials = 10000;
  std::vector<int> hits(6, 0);
  Rng rng(6);
  for (int n = 0; n < trials; ++n) {
    const Trajectory tr = sample_trajectory(mdp, Vector::Zero(2), 5, rng);
    for (int t = 0; t <= 5; ++t) hits[t] += tr.states[t][0];
  }
  for (int t = 0; t <= 5; ++t) {
    const double freq = static_cast<double>(hits[t]) / trials;
    const double se = std::sqrt(p1[t] * (1 - p1[t]) / trials);
    INFO("t=" << t << " freq " << freq << " exact " << p1[t]);
    CHECK(std::abs(freq - p1[t]) <= 4 * se);
  }
}

TEST_CASE("reinforce examples") {
  auto mdp = oracle::small_mdp();
  Rng rng(7);
  const Vector theta = randn(4, rng);
  Trajectory tr = sample_trajectory(*mdp, theta, 3, rng);
  std::fill(tr.losses.begin(), tr.losses.end(), 0.0);
  CHECK(reinforce_gradient(tr, theta, *mdp).isZero(0));

  // one step, two actions, uniform policy
  Matrix phi(2, 3);
  phi << 1.0, 0.5, 0.0, 0.0, 2.0, -1.0;
  FixedFeatures one(phi, {3.0, -2.0});
  const Vector bar = (phi.row(0) + phi.row(1)).transpose() / 2;
  for (int n = 0; n < 10; ++n) {
    const Trajectory t1 = sample_trajectory(one, Vector::Zero(3), 1, rng);
    const int a = t1.actions[0];
    const Vector want = (phi.row(a).transpose() - bar) * (a == 0 ? 3.0 : -2.0);
    CHECK((reinforce_gradient(t1, Vector::Zero(3), one) - want).norm() < 1e-14);
  }
}

TEST_CASE("reinforce rejects a trajectory drawn under another theta") {
  auto mdp = oracle::small_mdp();
  Rng rng(8);
  const Vector theta = randn(4, rng);
  const Trajectory tr = sample_trajectory(*mdp, theta, 3, rng);
  Vector other = theta;
  other(0) += 1e-9;
  CHECK_THROWS_AS(reinforce_gradient(tr, other, *mdp), StaleTrajectory);
}

TEST_CASE("property: exact REINFORCE expectation equals the gradient of J") {
  auto mdp = oracle::small_mdp();
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const Vector theta = randn(4, rng);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& th) { return oracle::exact_objective(*mdp, th); }, theta);
    const Vector exact = oracle::exact_reinforce_mean(*mdp, theta);
    REQUIRE((fd - exact).cwiseAbs().maxCoeff() <= 1e-6);
  }
  CHECK(oracle::enumerate_paths(*mdp, Vector::Zero(4)).size() <= 128u);
}

TEST_CASE("REINFORCE Monte-Carlo mean is unbiased") {
  auto mdp = oracle::small_mdp();
  Rng rng(10);
  const Vector theta = randn(4, rng);
  const Vector exact = oracle::exact_reinforce_mean(*mdp, theta);
  const int n = 100000;
  Vector sum = Vector::Zero(4), sq = Vector::Zero(4);
  for (int i = 0; i < n; ++i) {
    const Vector g = reinforce_gradient(sample_trajectory(*mdp, theta, 3, rng), theta, *mdp);
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Vector mean = sum / n;
  for (int j = 0; j < 4; ++j) {
    const double se = std::sqrt((sq(j) / n - mean(j) * mean(j)) / n);
    INFO("component " << j << " mean " << mean(j) << " exact " << exact(j) << " se " << se);
    CHECK(std::abs(mean(j) - exact(j)) <= 4 * se);
  }
}

TEST_CASE("mini-batch policy gradient") {
  auto mdp = oracle::small_mdp();
  Rng rng(11);
  const Vector theta = randn(4, rng);

  // M = 1 is one REINFORCE sample on the same stream
  Rng a(12), b(12);
  const Vector one = minibatch_pg(theta, *mdp, 1, 3, a);
  const Vector direct = reinforce_gradient(sample_trajectory(*mdp, theta, 3, b), theta, *mdp);
  CHECK(one == direct);

  std::vector<double> var;
  for (int m : {1, 4, 16}) {
    std::vector<Vector> draws;
    for (int i = 0; i < 6000; ++i) draws.push_back(minibatch_pg(theta, *mdp, m, 3, rng));
    var.push_back(trace_variance(draws));
  }
  INFO("variances " << var[0] << ' ' << var[1] << ' ' << var[2]);
  CHECK(var[0] / var[1] >= 4 / 1.5);
  CHECK(var[0] / var[1] <= 4 * 1.5);
  CHECK(var[1] / var[2] >= 4 / 1.5);
  CHECK(var[1] / var[2] <= 4 * 1.5);

  const Vector exact = oracle::exact_reinforce_mean(*mdp, theta);
  const int n = 10000;
  Vector sum = Vector::Zero(4), sq = Vector::Zero(4);
  for (int i = 0; i < n; ++i) {
    const Vector g = minibatch_pg(theta, *mdp, 4, 3, rng);
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Vector mean = sum / n;
  for (int j = 0; j < 4; ++j) {
    const double se = std::sqrt((sq(j) / n - mean(j) * mean(j)) / n);
    CHECK(std::abs(mean(j) - exact(j)) <= 4 * se);
  }
  CHECK_THROWS_AS(minibatch_pg(theta, *mdp, 0, 3, rng), InvalidArgument);
}

TEST_CASE("policy objective scales the gradient only") {
  auto mdp = oracle::small_mdp();
  const PolicyObjective plain(mdp), scaled(mdp, 0.25);
  Rng a(13), b(13);
  const Vector theta = Vector::Constant(4, 0.3);
  CHECK((scaled.stochastic_gradient(theta, 3, a) - 0.25 * plain.stochastic_gradient(theta, 3, b))
            .norm() < 1e-14);
  Rng c(14), d(14);
  CHECK(scaled.episode_reward(theta, c) == plain.episode_reward(theta, d));
  CHECK_THROWS_AS(PolicyObjective(mdp, 0.0), InvalidArgument);
}

TEST_CASE("localization defaults and geometry") {
  LocalizationConfig lc;
  CHECK(lc.l0 == 20.7);
  CHECK(lc.nu == 3.04);
  CHECK(lc.grid_size == 20);
  CHECK(lc.d0 == 1.0);
  LocalizationEnv env(lc, 0);
  CHECK(env.reward_at(lc.target_x, lc.target_y) == lc.base_reward);
  // staying on the target keeps paying the reward
  Rng rng(15);
  State s{lc.target_x, lc.target_y, 1, 1};
  for (int a = 0; a < 4; ++a) CHECK(env.step(s, a, rng).loss == -lc.base_reward);
  // straight moves toward the target reduce the distance penalty
  for (int x = 0; x < lc.target_x - 1; ++x) CHECK(env.reward_at(x + 1, 3) > env.reward_at(x, 3));
  for (int y = 19; y > lc.target_y + 1; --y) CHECK(env.reward_at(4, y - 1) > env.reward_at(4, y));
  CHECK(env.reward_at(13, 14) == doctest::Approx(-5.0));
  // the path-loss model inverts
  for (double d : {0.5, 1.0, 3.0, 12.0}) CHECK(env.invert_power(env.received_power(d)) == doctest::Approx(d));
}

TEST_CASE("localization moves and clamps") {
  LocalizationConfig lc;
  LocalizationEnv env(lc, 0);
  Rng rng(16);
  const State s{5, 5, 2, 2};
  CHECK(env.step(s, 0, rng).next[1] == 6);
  CHECK(env.step(s, 1, rng).next[1] == 4);
  CHECK(env.step(s, 2, rng).next[0] == 4);
  CHECK(env.step(s, 3, rng).next[0] == 6);
  const State corner{0, 0, 2, 2};
  CHECK(env.step(corner, 1, rng).next == State{0, 0, 2, 2});
  CHECK_THROWS_AS(env.step(s, 4, rng), InvalidArgument);
}

TEST_CASE("property: localization reward bounds") {
  for (bool hetero : {false, true}) {
    LocalizationConfig lc;
    lc.heterogeneous = hetero;
    const double diag = std::sqrt(2.0) * lc.grid_size;
    double top = 0;
    for (int i = 0; i < lc.n_agents; ++i) top = std::max(top, LocalizationEnv(lc, i).priority());
    for (int i = 0; i < lc.n_agents; ++i) {
      LocalizationEnv env(lc, i);
      for (int x = 0; x < lc.grid_size; ++x) {
        for (int y = 0; y < lc.grid_size; ++y) {
          REQUIRE(env.reward_at(x, y) >= -diag);
          REQUIRE(env.reward_at(x, y) <= top);
        }
      }
    }
  }
}

TEST_CASE("heterogeneous agents differ in priority and start area") {
  LocalizationConfig lc;
  lc.heterogeneous = true;
  auto envs = make_localization_env(lc);
  for (int i = 0; i < lc.n_agents; ++i) {
    const auto& e = static_cast<const LocalizationEnv&>(*envs[i]);
    CHECK(e.priority() == doctest::Approx(i + 1.0));
    Rng rng(17 + i);
    for (int t = 0; t < 50; ++t) {
      const State s = e.initial_state(rng);
      CHECK(s[0] < e.start_side());
      CHECK(s[1] < e.start_side());
    }
  }
}

TEST_CASE("noisy observations still point at the target") {
  LocalizationConfig lc;
  lc.oracle_state = false;
  LocalizationEnv env(lc, 0);
  Rng rng(18);
  const State s = env.step(State{2, 2, 0, 0}, 3, rng).next;
  CHECK(s[0] == 3);
  CHECK(s[2] == 2);
  CHECK(s[3] == 2);
}

TEST_CASE("resource preset values") {
  const ResourceConfig rc;
  CHECK(rc.h0 == 4.0);
  CHECK(rc.h1 == 2.0);
  CHECK(rc.h2 == 2.0);
  CHECK(rc.h3 == 3.0);
  CHECK(rc.arrival_rate == 3.0);
  CHECK(rc.capacity == 6);
  CHECK(rc.price == 5.0);
  CHECK(rc.intervals == 30);
  const auto preset = make_preset("fig7-resource-2").resource;
  CHECK(preset.h0 == 4.0);
  CHECK(preset.h3 == 3.0);
  CHECK(preset.capacity == 6);
  CHECK(preset.price == 5.0);
}

TEST_CASE("resource interval without events costs only holding") {
  ResourceEnv env(ResourceConfig{});
  for (int s = 0; s <= 6; ++s) {
    for (int a = 0; a <= 6; ++a) {
      const Transition tr = env.apply({s, 2, 0, 0}, a, 0, 0);
      CHECK(tr.loss == doctest::Approx(2.0 * s));
      CHECK(tr.next == State{s, 2, 0, 0});
    }
  }
  // d → 0 with nothing busy: every interval pays −h1·s
  ResourceConfig quiet;
  quiet.arrival_rate = 1e-12;
  auto env2 = make_resource_env(quiet);
  Rng rng(19);
  Trajectory tr = sample_trajectory(*env2, Vector::Zero(env2->feature_dim()), 30, rng);
  const int s0 = tr.states[0][0];
  for (int t = 0; t < 30; ++t) {
    CHECK(tr.states[t][0] == s0);
    CHECK(tr.losses[t] == doctest::Approx(2.0 * s0));
  }
}

TEST_CASE("resource initiation cost only when requesting") {
  ResourceEnv env(ResourceConfig{});
  // idle 3, two arrivals: serve 2 from the pool
  const Transition idle = env.apply({3, 0, 0, 0}, 0, 2, 0);
  CHECK(-idle.loss == doctest::Approx(-2.0 * 3 + 5.0 * 2));
  CHECK(idle.next == State{1, 2, 0, 0});
  // one extra unit: +h2 per unit and the h0 initiation cost
  const Transition req = env.apply({3, 0, 0, 0}, 1, 2, 0);
  CHECK(-req.loss == doctest::Approx(-2.0 * 3 - 2.0 * 1 + 5.0 * 2 - 4.0));
  // the pool never exceeds capacity
  const Transition full = env.apply({5, 0, 0, 0}, 6, 9, 0);
  CHECK(-full.loss == doctest::Approx(-2.0 * 5 - 2.0 * 1 + 5.0 * 6 - 4.0));
  CHECK(full.next[0] == 0);
  CHECK_THROWS_AS(env.apply({0, 0, 0, 0}, 7, 1, 0), InvalidArgument);
}

TEST_CASE("resource completion probability") {
  ResourceConfig rc;
  rc.workload_mean = 2.0;
  ResourceEnv env(rc);
  CHECK(env.completion_prob() == doctest::Approx(1 - std::exp(-0.5)));
}

TEST_CASE("trajectory csv") {
  auto env = make_resource_env(ResourceConfig{});
  Rng rng(20);
  const Trajectory tr = sample_trajectory(*env, Vector::Zero(env->feature_dim()), 4, rng);
  std::stringstream buf;
  write_trajectory_csv(buf, tr, *env);
  std::string line;
  std::getline(buf, line);
  CHECK(line == "step,state,action,reward");
  int rows = 0;
  while (std::getline(buf, line)) ++rows;
  CHECK(rows == 4);
}
