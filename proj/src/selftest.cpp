#include "decadmm/selftest.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "decadmm/admm.hpp"
#include "decadmm/baselines.hpp"
#include "decadmm/config.hpp"
#include "decadmm/graph.hpp"
#include "decadmm/metrics.hpp"
#include "decadmm/problems.hpp"
#include "decadmm/rl.hpp"
#include "decadmm/runner.hpp"

namespace decadmm {

namespace {

// Each property returns an empty string on success, otherwise the failure.
using Property = std::function<std::string()>;

Vector random_vector(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  for (int j = 0; j < dim; ++j) v(j) = n(rng);
  return v;
}

std::string eta_bound() {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20000; ++t) {
    const int dim = 1 + t % 7;
    const Vector mu = random_vector(dim, rng) * std::pow(10.0, 6 * u(rng) - 3);
    const Vector g = random_vector(dim, rng);
    const double eta_bar = 0.999 * u(rng);
    const double iota_sq = std::pow(10.0, 4 * u(rng) - 2);
    const int m = 1 + t % 50;
    const double eta = adaptive_eta(mu, g, eta_bar, iota_sq, m);
    if (!(eta >= 0 && eta <= eta_bar)) return "eta outside [0, eta_bar]";
    if (eta * eta * (mu - g).squaredNorm() > iota_sq / m) return "bound violated";
  }
  return {};
}

std::string z_identity() {
  const int n = 6;
  auto prob = synthesize_ridge(n, 30, 4, 0.1, 3, 0.3);
  auto objs = make_regression_objectives(RegressionKind::kRidge, prob.datasets);
  HyperParams hp{.rho = 3, .tau = 0.2, .gamma = 1, .eta_bar = 0.9, .iota_sq = 10, .batch_size = 3};
  IncrementalAdmm eng(generate_network(n, 0.5, 3), objs, hp, AdmmVariant::kAdaptive, 3);
  for (int k = 0; k < 3000; ++k) {
    eng.visit();
    const double dev = (eng.token().z - eng.recomputed_z()).cwiseAbs().maxCoeff();
    if (dev > 1e-9) return "z deviates by " + std::to_string(dev) + " at k=" + std::to_string(k);
  }
  return {};
}

std::string primal_stationarity() {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const int dim = 1 + t % 5;
    AgentState s{random_vector(dim, rng), random_vector(dim, rng)};
    Token tok{random_vector(dim, rng), random_vector(dim, rng)};
    HyperParams hp;
    hp.rho = 0.1 + std::abs(random_vector(1, rng)(0));
    hp.tau = std::abs(random_vector(1, rng)(0));
    const Vector th = primal_update(s, tok, hp);
    const Vector grad = tok.mu - hp.rho * (tok.z - th + s.lambda / hp.rho) + hp.tau * (th - s.theta);
    if (grad.norm() > 1e-9 * (1 + th.norm())) return "first-order residual " + std::to_string(grad.norm());
  }
  return {};
}

std::string comm_counts() {
  NetworkGraph tri = generate_network(3, 1.0, 1);
  auto prob = synthesize_ridge(3, 10, 4, 0.1, 1);
  auto objs = make_regression_objectives(RegressionKind::kRidge, prob.datasets);
  HyperParams hp{.rho = 1, .tau = 1, .gamma = 1, .eta_bar = 0.5, .iota_sq = 1, .batch_size = 2};
  IncrementalAdmm as(tri, objs, hp, AdmmVariant::kAdaptive, 1);
  IncrementalAdmm si(tri, objs, hp, AdmmVariant::kStochastic, 1);
  as.step();
  si.step();
  if (as.comm_scalars() != 8) return "asi-admm step sent " + std::to_string(as.comm_scalars());
  if (si.comm_scalars() != 4) return "si-admm step sent " + std::to_string(si.comm_scalars());
  DgdSolver dgd(tri, objs, 0.1, GradientSource{}, 1);
  dgd.step();
  if (dgd.comm_scalars() != 24) return "dgd round sent " + std::to_string(dgd.comm_scalars());
  IgdSolver igd(tri, objs, 0.1, GradientSource{}, 1);
  igd.step();
  if (igd.comm_scalars() != 4) return "igd step sent " + std::to_string(igd.comm_scalars());
  return {};
}

std::string graph_properties() {
  for (int n = 2; n <= 25; ++n) {
    for (double omega : {0.05, 0.3, 0.8, 1.0}) {
      const NetworkGraph g = generate_network(n, omega, 100 + n, BudgetPolicy::kClamp);
      if (!g.is_connected() || !g.has_valid_cycle()) return "bad graph n=" + std::to_string(n);
      const int want = std::max(edge_budget(n, omega), g.ring_edge_count());
      if (static_cast<int>(g.edges.size()) != want) return "edge count n=" + std::to_string(n);
      const Matrix w = metropolis_weights(g);
      if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-15) return "W not symmetric";
      if ((w.rowwise().sum().array() - 1.0).abs().maxCoeff() > 1e-12) return "W rows";
      if (w.minCoeff() < 0) return "W negative";
    }
  }
  return {};
}

std::string metric_invariances() {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + t % 5, dim = 1 + t % 4;
    std::vector<Vector> th, th0, shifted;
    const Vector shift = random_vector(dim, rng);
    for (int i = 0; i < n; ++i) {
      th.push_back(random_vector(dim, rng));
      th0.push_back(random_vector(dim, rng));
      shifted.push_back(th.back() + shift);
    }
    if (std::abs(consensus_error(th) - consensus_error(shifted)) > 1e-10 * (1 + consensus_error(th))) {
      return "consensus error not translation invariant";
    }
    const Vector star = random_vector(dim, rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Random(dim, dim)).householderQ();
    std::vector<Vector> qth, qth0;
    for (int i = 0; i < n; ++i) {
      qth.push_back(q * th[i]);
      qth0.push_back(q * th0[i]);
    }
    const double a = accuracy(th, th0, star), b = accuracy(qth, qth0, q * star);
    if (std::abs(a - b) > 1e-9 * (1 + a)) return "accuracy not rotation invariant";
  }
  return {};
}

std::string score_zero_mean() {
  auto envs = make_localization_env(LocalizationConfig{});
  const Mdp& mdp = *envs.front();
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Vector theta = random_vector(mdp.feature_dim(), rng);
    const State s = mdp.initial_state(rng);
    const Vector p = policy_probs(theta, s, mdp);
    if (std::abs(p.sum() - 1.0) > 1e-12 || p.minCoeff() < 0) return "probabilities";
    Vector acc = Vector::Zero(mdp.feature_dim());
    for (int a = 0; a < mdp.n_actions(); ++a) acc += p(a) * grad_log_policy(theta, s, a, mdp);
    if (acc.norm() > 1e-12) return "score mean " + std::to_string(acc.norm());
  }
  return {};
}

std::string checkpoint_resume() {
  auto prob = synthesize_ridge(5, 20, 3, 0.1, 9, 0.3);
  auto objs = make_regression_objectives(RegressionKind::kRidge, prob.datasets);
  HyperParams hp{.rho = 3, .tau = 0.2, .gamma = 1, .eta_bar = 0.9, .iota_sq = 10, .batch_size = 2};
  const auto g = generate_network(5, 0.6, 9);
  IncrementalAdmm a(g, objs, hp, AdmmVariant::kAdaptive, 9);
  for (int k = 0; k < 37; ++k) a.visit();
  std::stringstream buf;
  a.save_checkpoint(buf);
  IncrementalAdmm b(g, objs, hp, AdmmVariant::kAdaptive, 9);
  b.load_checkpoint(buf);
  for (int k = 0; k < 50; ++k) {
    a.visit();
    b.visit();
  }
  for (int i = 0; i < 5; ++i) {
    if (a.agents()[i].theta != b.agents()[i].theta) return "resumed run diverged";
  }
  return {};
}

std::string config_round_trip() {
  for (const auto& name : preset_names()) {
    std::stringstream first;
    save_config(first, make_preset(name));
    std::stringstream second;
    save_config(second, load_config(first));
    if (first.str() != second.str()) return "preset " + name + " does not round-trip";
  }
  return {};
}

std::string run_determinism() {
  ExperimentConfig cfg = make_preset("fig3-ridge");
  cfg.n_agents = 6;
  cfg.iterations = 200;
  cfg.regression.samples_per_agent = 20;
  for (const auto& a : cfg.algorithms) {
    const SeedRun x = run_seed(cfg, a, 2), y = run_seed(cfg, a, 2);
    if (x.records != y.records) return a + " differs between identical runs";
  }
  return {};
}

}  // namespace

bool run_selftest(std::ostream& os) {
  const std::vector<std::pair<const char*, Property>> props = {
      {"adaptive eta bound", eta_bound},
      {"token z identity", z_identity},
      {"primal first-order condition", primal_stationarity},
      {"communication counters", comm_counts},
      {"graph and mixing matrix", graph_properties},
      {"metric invariances", metric_invariances},
      {"score function mean", score_zero_mean},
      {"checkpoint resume", checkpoint_resume},
      {"config round trip", config_round_trip},
      {"run determinism", run_determinism},
  };
  bool all = true;
  for (const auto& [name, prop] : props) {
    std::string failure;
    try {
      failure = prop();
    } catch (const std::exception& e) {
      failure = std::string("threw: ") + e.what();
    }
    if (failure.empty()) {
      os << "PASS " << name << '\n';
    } else {
      os << "FAIL " << name << ": " << failure << '\n';
      all = false;
    }
  }
  return all;
}

}  // namespace decadmm
