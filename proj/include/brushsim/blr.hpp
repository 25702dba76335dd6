#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "brushsim/bandit.hpp"
#include "brushsim/math.hpp"

namespace brushsim {

// Bayesian linear regression of the reward with action centering:
//   R = m(S)^T a0 + pi f(S)^T a1 + (A - pi) f(S)^T b + eps,  eps ~ N(0, eta^2)
// Parameter layout is [a0 (4), a1 (3), b (3)], dimension 10.
inline constexpr int kBlrDim = 10;

struct BlrConfig {
  double sigma_prior = 5.0;  // prior std per coordinate
  double eta2 = 1.0;         // reward noise variance, fixed per run
};

struct BlrPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline Eigen::VectorXd blr_phi(const Eigen::Vector3d& f, const Eigen::Vector4d& m,
                               int action, double pi) {
  Eigen::VectorXd phi(kBlrDim);
  phi.head<4>() = m;
  phi.segment<3>(4) = pi * f;
  phi.tail<3>() = (action - pi) * f;
  return phi;
}

inline BlrPosterior blr_prior(const BlrConfig& cfg) {
  if (cfg.sigma_prior <= 0.0) throw std::invalid_argument("sigma_prior must be positive");
  BlrPosterior p;
  p.mean = Eigen::VectorXd::Zero(kBlrDim);
  p.cov = cfg.sigma_prior * cfg.sigma_prior * Eigen::MatrixXd::Identity(kBlrDim, kBlrDim);
  return p;
}

// Exact conjugate update recomputed from the full history. Each row uses
// the action probability recorded at its decision time.
inline BlrPosterior blr_update(const History& history, const BlrConfig& cfg) {
  const double inv_prior = 1.0 / (cfg.sigma_prior * cfg.sigma_prior);
  const double inv_eta2 = 1.0 / cfg.eta2;
  Eigen::MatrixXd precision =
      inv_prior * Eigen::MatrixXd::Identity(kBlrDim, kBlrDim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kBlrDim);
  for (const auto& row : history) {
    const Eigen::VectorXd phi = blr_phi(row.f, row.m, row.action, row.pi);
    precision.noalias() += inv_eta2 * phi * phi.transpose();
    rhs.noalias() += inv_eta2 * row.reward * phi;
  }
  BlrPosterior post;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("BLR precision matrix is not positive definite");
  post.cov = llt.solve(Eigen::MatrixXd::Identity(kBlrDim, kBlrDim));
  post.mean = llt.solve(rhs);
  return post;
}

// P(f^T beta > 0) under the posterior, in closed form via the normal CDF of
// the beta marginal (last three coordinates).
inline double blr_action_prob(const BlrPosterior& post, const Eigen::Vector3d& f) {
  const Eigen::Vector3d mu = post.mean.tail<3>();
  const Eigen::Matrix3d sigma = post.cov.bottomRightCorner<3, 3>();
  const double num = f.dot(mu);
  const double var = f.dot(sigma * f);
  if (var <= 0.0) return num > 0.0 ? 1.0 : (num < 0.0 ? 0.0 : 0.5);
  return norm_cdf(num / std::sqrt(var));
}

}  // namespace brushsim
