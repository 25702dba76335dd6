#pragma once

#include <cmath>
#include <stdexcept>

namespace brushsim {

// Linear predictors are clamped before exp/sigmoid so optimizer
// excursions cannot overflow.
inline constexpr double kLinPredClamp = 30.0;

inline double clamp_lin(double x) {
  if (x > kLinPredClamp) return kLinPredClamp;
  if (x < -kLinPredClamp) return -kLinPredClamp;
  return x;
}

inline double sigmoid(double x) {
  x = clamp_lin(x);
  return 1.0 / (1.0 + std::exp(-x));
}

inline double log_factorial(double n) { return std::lgamma(n + 1.0); }

// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double sample_variance(const double* xs, std::size_t n) {
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += xs[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(n - 1);
}

}  // namespace brushsim
