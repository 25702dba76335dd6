#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "brushsim/effects.hpp"
#include "brushsim/env_model.hpp"
#include "brushsim/features.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

enum class EffectScope { Population, PerUser };

// One of the four environment variants: {S, NS} base x {Pop, Het} effects.
struct EnvVariantSpec {
  BaseVariant base = BaseVariant::Stationary;
  EffectScope scope = EffectScope::Population;
};

inline std::string variant_id(const EnvVariantSpec& v) {
  std::string s = v.base == BaseVariant::Stationary ? "S" : "NS";
  return s + (v.scope == EffectScope::Population ? "_Pop" : "_Het");
}

inline EnvVariantSpec variant_from_id(const std::string& id) {
  if (id == "S_Pop") return {BaseVariant::Stationary, EffectScope::Population};
  if (id == "NS_Pop") return {BaseVariant::NonStationary, EffectScope::Population};
  if (id == "S_Het") return {BaseVariant::Stationary, EffectScope::PerUser};
  if (id == "NS_Het") return {BaseVariant::NonStationary, EffectScope::PerUser};
  throw std::invalid_argument("unknown environment variant: " + id);
}

// A fully assembled environment: fitted user pool plus per-class effects.
struct Environment {
  EnvVariantSpec spec;
  std::vector<UserEnvModel> pool;              // fitted base models for this variant
  std::map<ModelClass, ClassEffects> effects;  // derived from stationary fits
  EffectSign sign = EffectSign::Beneficial;
  int weekday_offset = 0;
};

// One simulated study participant: a base model index plus fixed effects.
struct SimUser {
  int pool_index = 0;
  UserEffects effects;
};

// Draws N users uniformly with replacement from the fitted pool. Under
// per-user scope each sampled instance gets fresh effect draws.
inline std::vector<SimUser> sample_study_population(const Environment& env, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("population size must be >= 1");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(env.pool.size()) - 1);
  std::vector<SimUser> users(n);
  for (auto& u : users) {
    u.pool_index = pick(rng);
    const ClassEffects& ce = env.effects.at(env.pool[u.pool_index].cls);
    if (env.spec.scope == EffectScope::PerUser) {
      u.effects = draw_user_effects(ce, rng);
    } else {
      u.effects = {ce.delta_b, ce.delta_n};
    }
  }
  return users;
}

inline constexpr int kRewardCap = 180;

struct StepOutcome {
  int duration = 0;
  int reward = 0;
};

// Samples one decision time's outcome; reward is the capped duration.
inline StepOutcome step(const Environment& env, const SimUser& user,
                        const Eigen::VectorXd& g, const Eigen::VectorXd& h, int action,
                        Rng& rng) {
  StepOutcome out;
  out.duration = duration_under_action(env.pool[user.pool_index], g, h, action,
                                       user.effects, env.sign, rng);
  out.reward = std::min(out.duration, kRewardCap);
  return out;
}

// Recomputes the environment feature vectors from a trajectory prefix.
// `global_day_offset` shifts the weekend calendar for users who enter the
// study after day 1; day-in-study stays user-relative.
struct EnvState {
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

inline EnvState advance(const Environment& env, std::span<const int> durations, int t,
                        DayNorm mode, int global_day_offset = 0) {
  EnvState s;
  const int offset = env.weekday_offset + global_day_offset;
  s.g = env_baseline_features(durations, t, env.spec.base, mode, offset);
  s.h = env_advantage_features(durations, t, env.spec.base, mode, offset);
  return s;
}

// Generates a closed-loop no-action trajectory of `T` decision times; used
// by the environment-quality checks (T = 56, fitting-mode day features).
inline std::vector<int> simulate_base_trajectory(const Environment& env, int pool_index,
                                                 int T, DayNorm mode, Rng& rng) {
  std::vector<int> durations;
  durations.reserve(T);
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd g =
        env_baseline_features(durations, t, env.spec.base, mode, env.weekday_offset);
    durations.push_back(sample_duration(env.pool[pool_index], g, rng));
  }
  return durations;
}

}  // namespace brushsim
