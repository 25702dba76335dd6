#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "brushsim/bandit.hpp"
#include "brushsim/env_model.hpp"
#include "brushsim/math.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

// Zero-inflated Poisson reward model for the posterior sampler:
//   Z ~ Bern(1 - sigmoid(m^T ab + A f^T bb)),  Y ~ Pois(exp(m^T ap + A f^T bp))
//   R = Z Y
// Parameter layout: theta = [ab (4), bb (3), ap (4), bp (3)], dimension 14.
inline constexpr int kZipDim = 14;
inline constexpr int kZipHalfDim = 7;

struct ZipChainConfig {
  double sigma_prior = 5.0;
  int chain_length = 20000;  // total MH steps
  int burn_in = 10000;
  int thin = 5;
  double target_accept = 0.25;
  double init_step = 0.1;
  int adapt_interval = 100;
};

struct ZipPosteriorDraws {
  Eigen::MatrixXd draws;      // M x 14, one retained draw per row
  double accept_rate = 0.0;   // after burn-in
  double proposal_step = 0.0; // frozen step size
  int chain_length = 0;
  int burn_in = 0;
  int thin = 0;
  bool accept_rate_warning = false;
};

// Log posterior of theta given the pooled history; design rows are
// x = [m, A f] applied to both halves of theta.
inline double zip_alg_log_posterior(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& rewards, double sigma_prior) {
  const Eigen::VectorXd lin_b = X * theta.head(kZipHalfDim);
  const Eigen::VectorXd lin_p = X * theta.tail(kZipHalfDim);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < rewards.size(); ++i) {
    const double p = 1.0 - sigmoid(lin_b(i));
    const double lambda = std::exp(clamp_lin(lin_p(i)));
    ll += zip_point_loglik(p, lambda, static_cast<int>(rewards(i)));
  }
  return ll - 0.5 * theta.squaredNorm() / (sigma_prior * sigma_prior);
}

inline Eigen::MatrixXd zip_design_matrix(const History& history) {
  Eigen::MatrixXd X(history.size(), kZipHalfDim);
  for (std::size_t i = 0; i < history.size(); ++i) {
    X.row(i).head<4>() = history[i].m;
    X.row(i).tail<3>() = history[i].action * history[i].f;
  }
  return X;
}

// Draws M = (chain_length - burn_in) / thin parameter vectors from the
// prior; used before the first update.
inline ZipPosteriorDraws zip_prior_draws(const ZipChainConfig& cfg, Rng& rng) {
  const int m = (cfg.chain_length - cfg.burn_in) / cfg.thin;
  ZipPosteriorDraws out;
  out.draws.resize(m, kZipDim);
  std::normal_distribution<double> prior(0.0, cfg.sigma_prior);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < kZipDim; ++j) out.draws(i, j) = prior(rng);
  return out;
}

// Random-walk Metropolis-Hastings with an isotropic normal proposal. The
// step size adapts toward the target acceptance rate during burn-in and is
// frozen afterwards.
inline ZipPosteriorDraws zip_mh_update(const History& history, const ZipChainConfig& cfg,
                                       Rng& rng) {
  if (cfg.chain_length <= cfg.burn_in || cfg.thin < 1)
    throw std::invalid_argument("invalid MH chain configuration");
  if (history.empty()) return zip_prior_draws(cfg, rng);

  const Eigen::MatrixXd X = zip_design_matrix(history);
  Eigen::VectorXd rewards(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) rewards(i) = history[i].reward;

  const int m = (cfg.chain_length - cfg.burn_in) / cfg.thin;
  ZipPosteriorDraws out;
  out.draws.resize(m, kZipDim);
  out.chain_length = cfg.chain_length;
  out.burn_in = cfg.burn_in;
  out.thin = cfg.thin;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(kZipDim);
  double logp = zip_alg_log_posterior(theta, X, rewards, cfg.sigma_prior);
  double step = cfg.init_step;
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  int window_accepts = 0;
  int post_accepts = 0;
  int retained = 0;
  Eigen::VectorXd prop(kZipDim);
  for (int s = 1; s <= cfg.chain_length; ++s) {
    for (int j = 0; j < kZipDim; ++j) prop(j) = theta(j) + step * unit(rng);
    const double logp_prop = zip_alg_log_posterior(prop, X, rewards, cfg.sigma_prior);
    const double log_alpha = std::min(0.0, logp_prop - logp);
    if (std::log(unif(rng)) < log_alpha) {
      theta = prop;
      logp = logp_prop;
      ++window_accepts;
      if (s > cfg.burn_in) ++post_accepts;
    }
    if (s <= cfg.burn_in && s % cfg.adapt_interval == 0) {
      const double rate = static_cast<double>(window_accepts) / cfg.adapt_interval;
      step *= std::exp(rate - cfg.target_accept);
      window_accepts = 0;
    }
    if (s > cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0 && retained < m) {
      out.draws.row(retained++) = theta;
    }
  }
  out.accept_rate =
      static_cast<double>(post_accepts) / (cfg.chain_length - cfg.burn_in);
  out.proposal_step = step;
  out.accept_rate_warning = out.accept_rate < 0.05 || out.accept_rate > 0.7;
  return out;
}

// Mean reward of the ZIP reward model at action a under parameters theta.
inline double zip_mean_reward(const Eigen::VectorXd& theta, const Eigen::Vector4d& m,
                              const Eigen::Vector3d& f, int a) {
  const double lin_b = m.dot(theta.head<4>()) + a * f.dot(theta.segment<3>(4));
  const double lin_p = m.dot(theta.segment<4>(kZipHalfDim)) + a * f.dot(theta.tail<3>());
  return (1.0 - sigmoid(lin_b)) * std::exp(clamp_lin(lin_p));
}

// Fraction of retained draws under which action 1's mean reward strictly
// exceeds action 0's.
inline double zip_action_prob(const ZipPosteriorDraws& draws, const Eigen::Vector4d& m,
                              const Eigen::Vector3d& f) {
  if (draws.draws.rows() == 0) throw std::invalid_argument("no posterior draws");
  int wins = 0;
  for (Eigen::Index i = 0; i < draws.draws.rows(); ++i) {
    const Eigen::VectorXd theta = draws.draws.row(i);
    if (zip_mean_reward(theta, m, f, 1) > zip_mean_reward(theta, m, f, 0)) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(draws.draws.rows());
}

}  // namespace brushsim
