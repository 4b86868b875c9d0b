#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "decadmm/metrics.hpp"
#include "decadmm/problems.hpp"
#include "decadmm/rl.hpp"

using namespace decadmm;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector randn(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  for (int j = 0; j < dim; ++j) v(j) = n(rng);
  return v;
}

}  // namespace

TEST_CASE("accuracy examples") {
  const Vector star = vec({1.0, 2.0});
  std::vector<Vector> zero(3, Vector::Zero(2));
  std::vector<Vector> at_star(3, star);
  CHECK(accuracy(at_star, zero, star) == 0.0);
  CHECK(accuracy(zero, zero, star) == 1.0);

  // per-agent ratios 0.04 and 0.16
  const Vector s = vec({0.0});
  std::vector<Vector> th0 = {vec({1.0}), vec({1.0})};
  std::vector<Vector> th = {vec({0.2}), vec({0.4})};
  CHECK(accuracy(th, th0, s) == doctest::Approx(0.10));
}

TEST_CASE("accuracy rejects a degenerate start") {
  const Vector star = vec({0.0, 0.0});
  std::vector<Vector> zero(2, Vector::Zero(2));
  CHECK_THROWS_AS(accuracy(zero, zero, star), DegenerateInit);
  std::vector<Vector> one = {Vector::Zero(2)};
  CHECK_THROWS_AS(accuracy(zero, one, star), InvalidArgument);
}

TEST_CASE("consensus error examples") {
  std::vector<Vector> same(4, vec({3.0, -1.0}));
  CHECK(consensus_error(same) == 0.0);
  std::vector<Vector> two = {vec({0.0}), vec({2.0})};
  CHECK(consensus_error(two) == doctest::Approx(1.0));
}

TEST_CASE("property: consensus error is translation invariant") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> a, b;
    const Vector c = randn(3, rng) * 10;
    for (int i = 0; i < 5; ++i) {
      a.push_back(randn(3, rng));
      b.push_back(a.back() + c);
    }
    REQUIRE(consensus_error(b) == doctest::Approx(consensus_error(a)).epsilon(1e-9));
  }
}

TEST_CASE("property: accuracy is invariant under a common orthogonal map") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const int dim = 2 + t % 4;
    std::vector<Vector> th, th0, qth, qth0;
    const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Random(dim, dim)).householderQ();
    const Vector star = randn(dim, rng);
    for (int i = 0; i < 4; ++i) {
      th.push_back(randn(dim, rng));
      th0.push_back(randn(dim, rng));
      qth.push_back(q * th.back());
      qth0.push_back(q * th0.back());
    }
    REQUIRE(accuracy(qth, qth0, q * star) == doctest::Approx(accuracy(th, th0, star)).epsilon(1e-9));
    REQUIRE(accuracy(th, th0, star) >= 0.0);
  }
}

TEST_CASE("lyapunov examples") {
  auto p = synthesize_ridge(3, 10, 2, 0.1, 1);
  auto objs = make_regression_objectives(RegressionKind::kRidge, p.datasets);
  std::vector<Vector> zero(3, Vector::Zero(2));
  double sum0 = 0;
  for (const auto& o : objs) sum0 += *o->loss(Vector::Zero(2));
  CHECK(lyapunov_value(zero, zero, Vector::Zero(2), 1.0, objs) == doctest::Approx(sum0));

  // λ = 0 and z = θ_i for every agent
  const Vector z = vec({0.4, -0.7});
  std::vector<Vector> th(3, z);
  double sum = 0;
  for (const auto& o : objs) sum += *o->loss(z);
  CHECK(lyapunov_value(th, zero, z, 2.5, objs) == doctest::Approx(sum));
}

TEST_CASE("lyapunov matches a term-by-term recomputation") {
  auto p = synthesize_ridge(4, 15, 3, 0.2, 6);
  auto objs = make_regression_objectives(RegressionKind::kRidge, p.datasets);
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    std::vector<Vector> th, la;
    for (int i = 0; i < 4; ++i) {
      th.push_back(randn(3, rng));
      la.push_back(randn(3, rng));
    }
    const Vector z = randn(3, rng);
    const double rho = 0.5 + t * 0.1;
    double want = 0;
    for (int i = 0; i < 4; ++i) {
      const auto& d = p.datasets[i];
      double f = 0;
      for (int m = 0; m < d.size(); ++m) {
        const double r = d.inputs.row(m).dot(th[i]) - d.targets(m);
        f += r * r;
      }
      want += f / d.size() + la[i].dot(z - th[i]) + rho / 2 * (z - th[i]).squaredNorm();
    }
    REQUIRE(std::abs(lyapunov_value(th, la, z, rho, objs) - want) <= 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("lyapunov is unavailable for RL objectives") {
  auto envs = make_localization_env(LocalizationConfig{});
  std::vector<std::shared_ptr<const Objective>> objs;
  for (auto& e : envs) objs.push_back(std::make_shared<PolicyObjective>(e));
  const int dim = objs.front()->dim();
  std::vector<Vector> zero(objs.size(), Vector::Zero(dim));
  CHECK_THROWS_AS(lyapunov_value(zero, zero, Vector::Zero(dim), 1.0, objs), NotAvailable);
}

TEST_CASE("average reward") {
  std::vector<double> one = {-7.5};
  CHECK(avg_reward(one) == -7.5);
  std::vector<double> two = {0.0, 4.0};
  CHECK(avg_reward(two) == 2.0);
  std::vector<double> none;
  CHECK_THROWS_AS(avg_reward(none), InvalidArgument);
}

TEST_CASE("moving average of a step function") {
  std::vector<double> series(200);
  for (int k = 0; k < 200; ++k) series[k] = k >= 100 ? 1.0 : 0.0;
  auto smooth = moving_average(series, 10);
  REQUIRE(smooth.size() == series.size());
  int cross = -1;
  for (int k = 0; k < 200; ++k) {
    if (smooth[k] >= 0.5) {
      cross = k;
      break;
    }
  }
  CHECK(cross >= 104);
  CHECK(cross <= 106);
  CHECK(smooth[0] == 0.0);
  CHECK(smooth[199] == 1.0);
  std::vector<double> ramp = {1, 2, 3};
  auto r = moving_average(ramp, 2);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 1.5);
  CHECK(r[2] == 2.5);
  CHECK_THROWS_AS(moving_average(ramp, 0), InvalidArgument);
}

TEST_CASE("metrics csv") {
  std::vector<MetricsRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].k = 10 * (i + 1);
    recs[i].comm_scalars = 20u * (i + 1);
    recs[i].accuracy = 1.0 / (i + 3);
    recs[i].consensus_error = 0.1 * i;
    recs[i].wall_time_s = 0.5 * i;
  }
  recs[1].lyapunov = -3.25;
  std::stringstream buf;
  write_metrics_csv(buf, recs, true);
  std::string header;
  std::getline(buf, header);
  CHECK(header == kMetricsCsvHeader);
  buf.seekg(0);
  auto back = read_metrics_csv(buf);
  CHECK(back == recs);

  // without wall time the column stays empty and reads back as zero
  std::stringstream quiet;
  write_metrics_csv(quiet, recs);
  std::string line;
  std::getline(quiet, line);
  std::getline(quiet, line);
  CHECK(line.back() == ',');
  CHECK(line.find(",,") != std::string::npos);
}

TEST_CASE("empty metrics csv has only the header") {
  std::stringstream buf;
  write_metrics_csv(buf, std::vector<MetricsRecord>{});
  CHECK(buf.str() == std::string(kMetricsCsvHeader) + "\n");
  CHECK(read_metrics_csv(buf).empty());
}

TEST_CASE("metrics csv rejects a foreign header") {
  std::stringstream buf("a,b,c\n1,2,3\n");
  CHECK_THROWS(read_metrics_csv(buf));
}
