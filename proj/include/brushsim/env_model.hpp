#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "brushsim/features.hpp"
#include "brushsim/math.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

enum class ModelClass { Zip, HurdleSqrt, HurdleLog };

inline const char* model_class_name(ModelClass c) {
  switch (c) {
    case ModelClass::Zip: return "zip";
    case ModelClass::HurdleSqrt: return "hurdle_sqrt";
    case ModelClass::HurdleLog: return "hurdle_log";
  }
  return "?";
}

inline ModelClass model_class_from_name(const std::string& s) {
  if (s == "zip") return ModelClass::Zip;
  if (s == "hurdle_sqrt") return ModelClass::HurdleSqrt;
  if (s == "hurdle_log") return ModelClass::HurdleLog;
  throw std::invalid_argument("unknown model class: " + s);
}

// A fitted per-user generative model of brushing duration under no action.
// bern_w drives the Bernoulli component through P(Z=1) = 1 - sigmoid(g^T w);
// nonzero_w is the Poisson log-rate (ZIP) or normal mean (hurdle) weight
// vector. sigma_u is the hurdle normal scale (unused for ZIP).
struct UserEnvModel {
  std::string user_id;
  ModelClass cls = ModelClass::Zip;
  BaseVariant variant = BaseVariant::Stationary;
  Eigen::VectorXd bern_w;
  Eigen::VectorXd nonzero_w;
  double sigma_u = 0.0;
};

// Shifts added to the linear predictors when an action is applied; both
// zero reproduces the base model exactly.
struct LinShift {
  double bern = 0.0;
  double nonzero = 0.0;
};

inline double bern_success_prob(const UserEnvModel& model, const Eigen::VectorXd& g,
                                double shift = 0.0) {
  return 1.0 - sigmoid(g.dot(model.bern_w) + shift);
}

inline int sample_poisson(Rng& rng, double lambda) {
  std::poisson_distribution<long long> pois(lambda);
  long long d = pois(rng);
  return d > 1000000000LL ? 1000000000 : static_cast<int>(d);
}

inline int sample_duration_shifted(const UserEnvModel& model, const Eigen::VectorXd& g,
                                   LinShift shift, Rng& rng) {
  if (g.size() != model.bern_w.size())
    throw std::invalid_argument("feature dimension does not match model");
  const double p_success = bern_success_prob(model, g, shift.bern);
  std::bernoulli_distribution bern(p_success);
  const bool z = bern(rng);
  const double lin = clamp_lin(g.dot(model.nonzero_w) + shift.nonzero);
  switch (model.cls) {
    case ModelClass::Zip: {
      const double lambda = std::exp(lin);
      const int y = sample_poisson(rng, lambda);
      return z ? y : 0;
    }
    case ModelClass::HurdleSqrt: {
      std::normal_distribution<double> norm(lin, model.sigma_u);
      const double y = norm(rng);
      return z ? static_cast<int>(std::llround(y * y)) : 0;
    }
    case ModelClass::HurdleLog: {
      std::normal_distribution<double> norm(lin, model.sigma_u);
      const double y = norm(rng);
      return z ? static_cast<int>(std::llround(std::exp(clamp_lin(y)))) : 0;
    }
  }
  return 0;
}

inline int sample_duration(const UserEnvModel& model, const Eigen::VectorXd& g, Rng& rng) {
  return sample_duration_shifted(model, g, {}, rng);
}

inline double marginal_mean_shifted(const UserEnvModel& model, const Eigen::VectorXd& g,
                                    LinShift shift = {}) {
  const double p_success = bern_success_prob(model, g, shift.bern);
  const double lin = clamp_lin(g.dot(model.nonzero_w) + shift.nonzero);
  switch (model.cls) {
    case ModelClass::Zip:
      return p_success * std::exp(lin);
    case ModelClass::HurdleSqrt:
      return p_success * (model.sigma_u * model.sigma_u + lin * lin);
    case ModelClass::HurdleLog:
      return p_success * std::exp(lin + model.sigma_u * model.sigma_u / 2.0);
  }
  return 0.0;
}

inline double marginal_mean(const UserEnvModel& model, const Eigen::VectorXd& g) {
  return marginal_mean_shifted(model, g, {});
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// Mean and variance of the non-zero component given the state.
inline Moments conditional_nonzero_moments(const UserEnvModel& model,
                                           const Eigen::VectorXd& g) {
  const double lin = clamp_lin(g.dot(model.nonzero_w));
  const double s2 = model.sigma_u * model.sigma_u;
  Moments m;
  switch (model.cls) {
    case ModelClass::Zip: {
      const double lambda = std::exp(lin);
      if (lambda <= 0.0)
        throw std::domain_error("zero-truncated Poisson moments undefined at lambda = 0");
      m.mean = lambda / (-std::expm1(-lambda));  // lambda e^l / (e^l - 1)
      m.variance = m.mean * (1.0 + lambda - m.mean);
      return m;
    }
    case ModelClass::HurdleSqrt: {
      m.mean = s2 + lin * lin;
      const double fourth = lin * lin * lin * lin + 3.0 * s2 * s2 + 6.0 * s2 * lin * lin;
      m.variance = fourth - m.mean * m.mean;
      return m;
    }
    case ModelClass::HurdleLog: {
      m.mean = std::exp(lin + s2 / 2.0);
      m.variance = std::expm1(s2) * std::exp(2.0 * lin + s2);
      return m;
    }
  }
  return m;
}

inline double prob_zero(const UserEnvModel& model, const Eigen::VectorXd& g) {
  const double p_success = bern_success_prob(model, g);
  if (model.cls == ModelClass::Zip) {
    const double lambda = std::exp(clamp_lin(g.dot(model.nonzero_w)));
    return (1.0 - p_success) + p_success * std::exp(-lambda);
  }
  // Hurdle zeros come (almost) only from the Bernoulli component.
  return 1.0 - p_success;
}

// Point log-likelihood of a zero-inflated Poisson observation with success
// probability p = P(Z=1) and rate lambda. Finite penalty keeps multi-start
// searches comparable when lambda degenerates with a positive count.
inline double zip_point_loglik(double p, double lambda, int d) {
  if (d == 0) return std::log((1.0 - p) + p * std::exp(-lambda));
  if (lambda <= 0.0 || p <= 0.0) return -1e9;
  return std::log(p) - lambda + d * std::log(lambda) - log_factorial(d);
}

// Dataset log-likelihood for a model class at given parameters. For hurdle
// classes this is the factored Bernoulli + transformed-normal likelihood
// (the transform is sqrt or log of the non-zero durations).
inline double log_likelihood(ModelClass cls, const Eigen::VectorXd& bern_w,
                             const Eigen::VectorXd& nonzero_w, double sigma_u,
                             const Eigen::MatrixXd& G, const Eigen::VectorXi& D) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    const double p = 1.0 - sigmoid(G.row(i).dot(bern_w));
    const double lin = clamp_lin(G.row(i).dot(nonzero_w));
    const int d = D(i);
    if (cls == ModelClass::Zip) {
      ll += zip_point_loglik(p, std::exp(lin), d);
      continue;
    }
    // Bernoulli part on the observed zero indicator.
    ll += d > 0 ? std::log(std::max(p, 1e-300)) : std::log(std::max(1.0 - p, 1e-300));
    if (d > 0) {
      const double y = cls == ModelClass::HurdleSqrt ? std::sqrt(static_cast<double>(d))
                                                     : std::log(static_cast<double>(d));
      const double r = (y - lin) / sigma_u;
      ll += -0.5 * r * r - std::log(sigma_u) - 0.5 * std::log(2.0 * M_PI);
    }
  }
  return ll;
}

}  // namespace brushsim
