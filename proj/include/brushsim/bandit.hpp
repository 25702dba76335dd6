#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "brushsim/rng.hpp"

namespace brushsim {

inline constexpr double kPiMin = 0.35;
inline constexpr double kPiMax = 0.75;

inline double clip_prob(double pi, double pi_min = kPiMin, double pi_max = kPiMax) {
  if (pi_min > pi_max) throw std::invalid_argument("pi_min > pi_max");
  return std::min(pi_max, std::max(pi, pi_min));
}

inline int select_action(double pi, Rng& rng) {
  std::bernoulli_distribution bern(pi);
  return bern(rng) ? 1 : 0;
}

// One logged decision: algorithm features, the action taken, the action
// probability recorded at decision time, and the observed reward.
struct HistoryRow {
  Eigen::Vector3d f;
  Eigen::Vector4d m;
  int action = 0;
  double pi = 0.5;
  double reward = 0.0;
};

using History = std::vector<HistoryRow>;

}  // namespace brushsim
