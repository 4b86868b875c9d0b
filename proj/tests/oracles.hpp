#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the code under test for the quantity
// it checks.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "decadmm/admm.hpp"
#include "decadmm/rl.hpp"

namespace oracle {

using decadmm::AgentState;
using decadmm::HyperParams;
using decadmm::Matrix;
using decadmm::Token;
using decadmm::Vector;

inline double primal_subproblem(const Vector& th, const AgentState& s, const Token& t,
                                const HyperParams& hp) {
  return t.mu.dot(th - s.theta) + hp.rho / 2 * (t.z - th + s.lambda / hp.rho).squaredNorm() +
         hp.tau / 2 * (th - s.theta).squaredNorm();
}

// Cyclic coordinate golden-section search; no derivatives used.
inline Vector golden_coordinate_min(const std::function<double(const Vector&)>& f, int dim,
                                    double bound = 100.0, int sweeps = 3) {
  const double phi = (std::sqrt(5.0) - 1) / 2;
  Vector x = Vector::Zero(dim);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int j = 0; j < dim; ++j) {
      auto fj = [&](double v) {
        Vector y = x;
        y(j) = v;
        return f(y);
      };
      double a = -bound, b = bound;
      double c = b - phi * (b - a), d = a + phi * (b - a);
      double fc = fj(c), fd = fj(d);
      while (b - a > 1e-10) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - phi * (b - a);
          fc = fj(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + phi * (b - a);
          fd = fj(d);
        }
      }
      x(j) = (a + b) / 2;
    }
  }
  return x;
}

// Two states, two actions, one-hot features over (s, a).
inline std::shared_ptr<decadmm::TabularMdp> small_mdp(int horizon = 3, double discount = 0.9) {
  return std::make_shared<decadmm::TabularMdp>(
      std::vector<std::vector<std::vector<double>>>{{{0.7, 0.3}, {0.2, 0.8}},
                                                    {{0.4, 0.6}, {0.9, 0.1}}},
      std::vector<std::vector<double>>{{1.0, -0.5}, {2.0, 0.3}}, std::vector<double>{0.6, 0.4},
      horizon, discount);
}

// Softmax written out independently of policy_probs.
inline std::vector<double> softmax_row(const decadmm::TabularMdp& mdp, const Vector& theta, int s) {
  const int na = mdp.n_actions();
  std::vector<double> logits(na), p(na);
  double top = -1e300;
  for (int a = 0; a < na; ++a) {
    logits[a] = theta(s * na + a);
    top = std::max(top, logits[a]);
  }
  double z = 0;
  for (int a = 0; a < na; ++a) z += p[a] = std::exp(logits[a] - top);
  for (auto& v : p) v /= z;
  return p;
}

struct Path {
  double prob = 1.0;
  std::vector<int> states;
  std::vector<int> actions;
};

// Every (s_0, a_0, s_1, ..., a_{T-1}) path with its probability.
inline std::vector<Path> enumerate_paths(const decadmm::TabularMdp& mdp, const Vector& theta) {
  const int ns = mdp.n_states(), na = mdp.n_actions(), T = mdp.horizon();
  std::vector<Path> out;
  std::function<void(Path)> grow = [&](Path p) {
    if (static_cast<int>(p.actions.size()) == T) {
      out.push_back(std::move(p));
      return;
    }
    const int s = p.states.back();
    const auto pi = softmax_row(mdp, theta, s);
    for (int a = 0; a < na; ++a) {
      if (static_cast<int>(p.actions.size()) + 1 == T) {
        Path q = p;
        q.prob *= pi[a];
        q.actions.push_back(a);
        grow(std::move(q));
        continue;
      }
      for (int s2 = 0; s2 < ns; ++s2) {
        Path q = p;
        q.prob *= pi[a] * mdp.transition_prob(s, a, s2);
        q.actions.push_back(a);
        q.states.push_back(s2);
        grow(std::move(q));
      }
    }
  };
  for (int s = 0; s < ns; ++s) {
    Path p;
    p.prob = mdp.initial_prob(s);
    p.states.push_back(s);
    grow(p);
  }
  return out;
}

// J(θ) = E[Σ_t α^t g(s_t, a_t)] by enumeration.
inline double exact_objective(const decadmm::TabularMdp& mdp, const Vector& theta) {
  double j = 0;
  for (const auto& p : enumerate_paths(mdp, theta)) {
    double ret = 0, w = 1;
    for (std::size_t t = 0; t < p.actions.size(); ++t) {
      ret += w * mdp.loss(p.states[t], p.actions[t]);
      w *= mdp.discount();
    }
    j += p.prob * ret;
  }
  return j;
}

// Central differences of the enumerated J.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

// E[reinforce_gradient] over all enumerated paths; the score term is written
// out from the one-hot features rather than taken from grad_log_policy.
inline Vector exact_reinforce_mean(const decadmm::TabularMdp& mdp, const Vector& theta) {
  const int na = mdp.n_actions();
  Vector acc = Vector::Zero(mdp.feature_dim());
  for (const auto& p : enumerate_paths(mdp, theta)) {
    Vector score = Vector::Zero(mdp.feature_dim());
    double ret = 0, w = 1;
    for (std::size_t t = 0; t < p.actions.size(); ++t) {
      const int s = p.states[t];
      const auto pi = softmax_row(mdp, theta, s);
      for (int a = 0; a < na; ++a) score(s * na + a) += (a == p.actions[t] ? 1.0 : 0.0) - pi[a];
      ret += w * mdp.loss(s, p.actions[t]);
      w *= mdp.discount();
    }
    acc += p.prob * score * ret;
  }
  return acc;
}

}  // namespace oracle
