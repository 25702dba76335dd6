#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "brushsim/env_model.hpp"
#include "brushsim/math.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

// How the Bernoulli-component effect enters the linear predictor. The
// formula as printed adds it (Literal), which raises the zero probability;
// Beneficial flips the sign so a positive effect increases brushing.
enum class EffectSign { Literal, Beneficial };

// Population effect sizes and heterogeneity scales for one model class,
// derived from stationary fits.
struct ClassEffects {
  double delta_b = 0.0;
  double delta_n = 0.0;
  double sigma_b = 0.0;
  double sigma_n = 0.0;
  int n_users = 0;
};

// Mean absolute weight over the non-intercept dimensions 2..5.
inline double mean_abs_effect(const Eigen::VectorXd& w) {
  if (w.size() < 5)
    throw std::invalid_argument("effect sizes require stationary weights in R^5");
  double s = 0.0;
  for (int d = 1; d <= 4; ++d) s += std::abs(w(d));
  return s / 4.0;
}

// Derives per-class effect sizes from fitted stationary models. The
// heterogeneity scale is the sample (n-1) standard deviation of the
// per-user mean absolute weights.
inline std::map<ModelClass, ClassEffects> population_effect_sizes(
    const std::vector<UserEnvModel>& stationary_fits) {
  std::map<ModelClass, std::vector<std::pair<double, double>>> per_class;
  for (const auto& m : stationary_fits) {
    if (m.variant != BaseVariant::Stationary)
      throw std::invalid_argument("effect sizes are derived from stationary fits");
    per_class[m.cls].emplace_back(mean_abs_effect(m.bern_w), mean_abs_effect(m.nonzero_w));
  }
  std::map<ModelClass, ClassEffects> out;
  for (auto& [cls, mus] : per_class) {
    ClassEffects e;
    e.n_users = static_cast<int>(mus.size());
    std::vector<double> mb, mn;
    for (auto& [b, n] : mus) {
      e.delta_b += b;
      e.delta_n += n;
      mb.push_back(b);
      mn.push_back(n);
    }
    e.delta_b /= e.n_users;
    e.delta_n /= e.n_users;
    e.sigma_b = std::sqrt(sample_variance(mb.data(), mb.size()));
    e.sigma_n = std::sqrt(sample_variance(mn.data(), mn.size()));
    out[cls] = e;
  }
  return out;
}

// A user's drawn (or population) effect sizes. The scalar multiplies every
// dimension of the advantage feature vector h(S).
struct UserEffects {
  double delta_b = 0.0;
  double delta_n = 0.0;
};

inline UserEffects draw_user_effects(const ClassEffects& cls, Rng& rng) {
  std::normal_distribution<double> db(cls.delta_b, cls.sigma_b);
  std::normal_distribution<double> dn(cls.delta_n, cls.sigma_n);
  return {db(rng), dn(rng)};
}

// Linear-predictor shifts for action a in state h.
inline LinShift action_shift(const Eigen::VectorXd& h, int a, const UserEffects& eff,
                             EffectSign sign) {
  if (a == 0) return {};
  const double hsum = h.sum();
  LinShift s;
  s.bern = (sign == EffectSign::Beneficial ? -1.0 : 1.0) * eff.delta_b * hsum;
  s.nonzero = eff.delta_n * hsum;
  return s;
}

inline int duration_under_action(const UserEnvModel& model, const Eigen::VectorXd& g,
                                 const Eigen::VectorXd& h, int a, const UserEffects& eff,
                                 EffectSign sign, Rng& rng) {
  return sample_duration_shifted(model, g, action_shift(h, a, eff, sign), rng);
}

}  // namespace brushsim
