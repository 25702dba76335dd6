#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "brushsim/blr.hpp"

using namespace brushsim;

namespace {

History random_history(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> upi(0.35, 0.75);
  std::bernoulli_distribution act(0.5);
  History h;
  for (int i = 0; i < n; ++i) {
    HistoryRow row;
    row.f << 1.0, n01(rng), n01(rng);
    row.m << row.f(0), row.f(1), row.f(2), n01(rng);
    row.pi = upi(rng);
    row.action = act(rng) ? 1 : 0;
    row.reward = 100.0 + 30.0 * n01(rng);
    h.push_back(row);
  }
  return h;
}

}  // namespace

TEST_CASE("empty history returns the prior") {
  BlrConfig cfg;
  cfg.eta2 = 900.0;
  const BlrPosterior post = blr_update({}, cfg);
  CHECK(post.mean.isZero());
  CHECK(post.cov.isApprox(25.0 * Eigen::MatrixXd::Identity(kBlrDim, kBlrDim)));
}

TEST_CASE("feature map layout") {
  Eigen::Vector3d f(1.0, 2.0, 3.0);
  Eigen::Vector4d m(1.0, 2.0, 3.0, 4.0);
  const Eigen::VectorXd phi = blr_phi(f, m, 1, 0.4);
  REQUIRE(phi.size() == kBlrDim);
  CHECK(phi.head<4>().cwiseEqual(m).all());
  CHECK(phi.segment<3>(4).isApprox(0.4 * f, 1e-15));
  CHECK(phi.tail<3>().isApprox(0.6 * f, 1e-15));
}

TEST_CASE("posterior matches a sequential rank-one oracle") {
  BlrConfig cfg;
  cfg.eta2 = 625.0;
  const History h = random_history(25, 123);
  const BlrPosterior post = blr_update(h, cfg);

  // Independent oracle: Kalman-style sequential conditioning, one row at a
  // time, via the Sherman-Morrison identity.
  Eigen::MatrixXd cov = 25.0 * Eigen::MatrixXd::Identity(kBlrDim, kBlrDim);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kBlrDim);
  for (const auto& row : h) {
    const Eigen::VectorXd phi = blr_phi(row.f, row.m, row.action, row.pi);
    const Eigen::VectorXd cphi = cov * phi;
    const double s = cfg.eta2 + phi.dot(cphi);
    mean += cphi * ((row.reward - phi.dot(mean)) / s);
    cov -= (cphi * cphi.transpose()) / s;
  }
  CHECK((post.mean - mean).norm() < 1e-8);
  CHECK((post.cov - cov).norm() < 1e-8);
}

TEST_CASE("posterior matches a two-dimensional grid quadrature oracle") {
  // Five observations whose features touch only coordinates 0 and 7, so the
  // joint posterior factorizes and those two coordinates can be integrated
  // on a grid.
  BlrConfig cfg;
  cfg.eta2 = 4.0;
  History h;
  const double m0s[5] = {1.0, 1.0, 1.0, 1.0, 1.0};
  const int acts[5] = {0, 1, 0, 1, 1};
  const double rewards[5] = {2.0, 5.0, 1.0, 6.0, 4.0};
  for (int i = 0; i < 5; ++i) {
    HistoryRow row;
    row.m << m0s[i], 0.0, 0.0, 0.0;
    row.f << 2.0, 0.0, 0.0;
    row.pi = 0.0;  // zeroes the pi * f block, leaving phi7 = A * f0
    row.action = acts[i];
    row.reward = rewards[i];
    h.push_back(row);
  }
  const BlrPosterior post = blr_update(h, cfg);

  // Grid quadrature of the unnormalized posterior over (theta0, theta7).
  const double lo = -20.0, hi = 20.0, dx = 0.01;
  const int ng = static_cast<int>((hi - lo) / dx) + 1;
  double z = 0.0, m0 = 0.0, m7 = 0.0, v00 = 0.0, v77 = 0.0, v07 = 0.0;
  for (int i = 0; i < ng; ++i) {
    const double t0 = lo + i * dx;
    for (int j = 0; j < ng; ++j) {
      const double t7 = lo + j * dx;
      double logp = -(t0 * t0 + t7 * t7) / (2.0 * 25.0);
      for (int r = 0; r < 5; ++r) {
        const double pred = m0s[r] * t0 + acts[r] * 2.0 * t7;
        const double e = rewards[r] - pred;
        logp -= e * e / (2.0 * cfg.eta2);
      }
      const double w = std::exp(logp);
      z += w;
      m0 += w * t0;
      m7 += w * t7;
      v00 += w * t0 * t0;
      v77 += w * t7 * t7;
      v07 += w * t0 * t7;
    }
  }
  m0 /= z;
  m7 /= z;
  v00 = v00 / z - m0 * m0;
  v77 = v77 / z - m7 * m7;
  v07 = v07 / z - m0 * m7;

  CHECK_THAT(post.mean(0), Catch::Matchers::WithinAbs(m0, 1e-6));
  CHECK_THAT(post.mean(7), Catch::Matchers::WithinAbs(m7, 1e-6));
  CHECK_THAT(post.cov(0, 0), Catch::Matchers::WithinAbs(v00, 1e-6));
  CHECK_THAT(post.cov(7, 7), Catch::Matchers::WithinAbs(v77, 1e-6));
  CHECK_THAT(post.cov(0, 7), Catch::Matchers::WithinAbs(v07, 1e-6));
  // Untouched coordinates keep the prior.
  CHECK_THAT(post.mean(5), Catch::Matchers::WithinAbs(0.0, 1e-10));
  CHECK_THAT(post.cov(5, 5), Catch::Matchers::WithinAbs(25.0, 1e-8));
}

TEST_CASE("posterior is invariant to history order") {
  BlrConfig cfg;
  cfg.eta2 = 300.0;
  History h = random_history(15, 7);
  const BlrPosterior a = blr_update(h, cfg);
  std::mt19937_64 rng(99);
  std::shuffle(h.begin(), h.end(), rng);
  const BlrPosterior b = blr_update(h, cfg);
  CHECK((a.mean - b.mean).norm() < 1e-10);
  CHECK((a.cov - b.cov).norm() < 1e-10);
}

TEST_CASE("posterior covariance stays positive definite") {
  BlrConfig cfg;
  cfg.eta2 = 100.0;
  const BlrPosterior post = blr_update(random_history(60, 55), cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post.cov);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("huge noise variance collapses the update to the prior") {
  BlrConfig cfg;
  cfg.eta2 = 1e8;
  const BlrPosterior post = blr_update(random_history(10, 2), cfg);
  CHECK(post.mean.norm() < 1e-3);
  CHECK((post.cov - 25.0 * Eigen::MatrixXd::Identity(kBlrDim, kBlrDim)).norm() < 1e-2);
}

TEST_CASE("closed-form action probability matches posterior sampling") {
  BlrPosterior post;
  post.mean = Eigen::VectorXd::Zero(kBlrDim);
  post.mean.tail<3>() << 0.8, -0.3, 0.2;
  Eigen::Matrix3d a;
  a << 1.0, 0.2, 0.0, 0.1, 0.9, 0.3, 0.0, -0.2, 1.1;
  const Eigen::Matrix3d sigma = a * a.transpose();
  post.cov = Eigen::MatrixXd::Identity(kBlrDim, kBlrDim);
  post.cov.bottomRightCorner<3, 3>() = sigma;

  const Eigen::Vector3d f(1.0, 0.5, -1.0);
  const double p = blr_action_prob(post, f);

  const Eigen::Matrix3d chol = sigma.llt().matrixL();
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int n = 200000;
  int wins = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d z(n01(rng), n01(rng), n01(rng));
    const Eigen::Vector3d beta = post.mean.tail<3>() + chol * z;
    if (f.dot(beta) > 0.0) ++wins;
  }
  const double mc = static_cast<double>(wins) / n;
  const double se = std::sqrt(p * (1.0 - p) / n);
  CHECK_THAT(p, Catch::Matchers::WithinAbs(mc, 3.0 * se + 1e-4));
}

TEST_CASE("action probability is scale invariant in the features") {
  BlrPosterior post = blr_prior({5.0, 100.0});
  post.mean.tail<3>() << 0.4, 0.1, -0.2;
  const Eigen::Vector3d f(1.0, -0.3, 0.7);
  const double p1 = blr_action_prob(post, f);
  const double p2 = blr_action_prob(post, (7.0 * f).eval());
  CHECK_THAT(p1, Catch::Matchers::WithinAbs(p2, 1e-12));
}

TEST_CASE("degenerate posterior variance falls back to the sign") {
  BlrPosterior post;
  post.mean = Eigen::VectorXd::Zero(kBlrDim);
  post.cov = Eigen::MatrixXd::Zero(kBlrDim, kBlrDim);
  const Eigen::Vector3d f(1.0, 0.0, 0.0);
  CHECK(blr_action_prob(post, f) == 0.5);
  post.mean(7) = 2.0;
  CHECK(blr_action_prob(post, f) == 1.0);
  post.mean(7) = -2.0;
  CHECK(blr_action_prob(post, f) == 0.0);
}

TEST_CASE("invalid prior scale is rejected") {
  CHECK_THROWS_AS(blr_prior({0.0, 1.0}), std::invalid_argument);
}
