#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "brushsim/env_fit.hpp"
#include "brushsim/env_model.hpp"
#include "brushsim/sim.hpp"

namespace brushsim {

// The five moment metrics comparing observed and simulated brushing data.
struct MomentMetrics {
  double missed_proportion = 0.0;      // fraction of zero-duration windows
  double avg_nonzero = 0.0;            // mean non-zero duration
  double var_nonzero = 0.0;            // pooled variance of non-zero durations
  double var_user_means = 0.0;         // between-user variance of mean durations
  double avg_within_user_var = 0.0;    // mean within-user variance
};

struct MomentReport {
  MomentMetrics observed;
  MomentMetrics simulated;  // averaged over replicate trials
  int replicates = 0;
};

inline MomentMetrics compute_moments(const std::vector<std::vector<int>>& trajectories) {
  MomentMetrics m;
  const int n = static_cast<int>(trajectories.size());
  std::vector<double> nonzero_all, user_means;
  double missed = 0.0, within_var = 0.0;
  std::vector<double> user_nonzero_means;
  for (const auto& traj : trajectories) {
    const int T = static_cast<int>(traj.size());
    int zeros = 0, nz_count = 0;
    double sum = 0.0, nz_sum = 0.0;
    std::vector<double> vals(traj.begin(), traj.end());
    for (int d : traj) {
      sum += d;
      if (d == 0) {
        ++zeros;
      } else {
        ++nz_count;
        nz_sum += d;
        nonzero_all.push_back(d);
      }
    }
    missed += static_cast<double>(zeros) / T;
    if (nz_count > 0) user_nonzero_means.push_back(nz_sum / nz_count);
    user_means.push_back(sum / T);
    within_var += sample_variance(vals.data(), vals.size());
  }
  m.missed_proportion = missed / n;
  m.avg_nonzero = user_nonzero_means.empty()
                      ? 0.0
                      : std::accumulate(user_nonzero_means.begin(),
                                        user_nonzero_means.end(), 0.0) /
                            static_cast<double>(user_nonzero_means.size());
  m.var_nonzero = sample_variance(nonzero_all.data(), nonzero_all.size());
  m.var_user_means = sample_variance(user_means.data(), user_means.size());
  m.avg_within_user_var = within_var / n;
  return m;
}

// Computes the moment metrics on the observed corpus and on `replicates`
// simulated no-action datasets of the same shape (56 windows per user,
// fitting-mode day features).
inline MomentReport moment_report(const Environment& env, const Corpus& corpus,
                                  int replicates, Rng& rng) {
  MomentReport report;
  report.replicates = replicates;
  std::vector<std::vector<int>> observed;
  observed.reserve(corpus.users.size());
  for (const auto& u : corpus.users) observed.push_back(u.durations);
  report.observed = compute_moments(observed);

  MomentMetrics acc;
  for (int r = 0; r < replicates; ++r) {
    std::vector<std::vector<int>> sim;
    sim.reserve(env.pool.size());
    for (std::size_t i = 0; i < env.pool.size(); ++i) {
      const int T = corpus.users[i].num_decisions();
      sim.push_back(
          simulate_base_trajectory(env, static_cast<int>(i), T, DayNorm::Fitting, rng));
    }
    const MomentMetrics m = compute_moments(sim);
    acc.missed_proportion += m.missed_proportion;
    acc.avg_nonzero += m.avg_nonzero;
    acc.var_nonzero += m.var_nonzero;
    acc.var_user_means += m.var_user_means;
    acc.avg_within_user_var += m.avg_within_user_var;
  }
  report.simulated = {acc.missed_proportion / replicates, acc.avg_nonzero / replicates,
                      acc.var_nonzero / replicates, acc.var_user_means / replicates,
                      acc.avg_within_user_var / replicates};
  return report;
}

// Variance-capture statistic: per-user average of squared residuals scaled
// by the predicted variance (the variance, not its square root, divides the
// residual, matching the statistic as defined).
struct VarianceCapture {
  double mean = 0.0;
  double stddev = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_users = 0;
  int guarded_terms = 0;  // denominator-floored terms
  int excluded_users = 0; // users with no non-zero sessions (non-zero statistic only)
};

inline constexpr double kVarFloor = 1e-8;

namespace detail {

inline VarianceCapture summarize_capture(std::vector<double> us, int guarded, int excluded) {
  VarianceCapture v;
  v.n_users = static_cast<int>(us.size());
  v.guarded_terms = guarded;
  v.excluded_users = excluded;
  if (us.empty()) return v;
  v.mean = std::accumulate(us.begin(), us.end(), 0.0) / v.n_users;
  v.stddev = std::sqrt(sample_variance(us.data(), us.size()));
  const double half = 1.96 * v.stddev / std::sqrt(static_cast<double>(v.n_users));
  v.ci_low = v.mean - half;
  v.ci_high = v.mean + half;
  return v;
}

}  // namespace detail

// Statistic for the Bernoulli part: residuals of the zero indicator scaled
// by p(1-p).
inline VarianceCapture variance_capture_bernoulli(const std::vector<UserEnvModel>& fits,
                                                  const Corpus& corpus,
                                                  int weekday_offset = 0) {
  std::vector<double> us;
  int guarded = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const UserDesign d = build_user_design(corpus.users[i], fits[i].variant, weekday_offset);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < d.D.size(); ++t) {
      const Eigen::VectorXd g = d.G.row(t);
      const double p = bern_success_prob(fits[i], g);
      double var = p * (1.0 - p);
      if (var < kVarFloor) {
        var = kVarFloor;
        ++guarded;
      }
      const double r = ((d.D(t) > 0 ? 1.0 : 0.0) - p) / var;
      acc += r * r;
    }
    us.push_back(acc / static_cast<double>(d.D.size()));
  }
  return detail::summarize_capture(std::move(us), guarded, 0);
}

// Statistic for the non-zero part: residuals of non-zero durations scaled
// by the model's conditional variance. Users with no non-zero sessions are
// excluded.
inline VarianceCapture variance_capture_nonzero(const std::vector<UserEnvModel>& fits,
                                                const Corpus& corpus,
                                                int weekday_offset = 0) {
  std::vector<double> us;
  int guarded = 0, excluded = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const UserDesign d = build_user_design(corpus.users[i], fits[i].variant, weekday_offset);
    double acc = 0.0;
    int count = 0;
    for (Eigen::Index t = 0; t < d.D.size(); ++t) {
      if (d.D(t) == 0) continue;
      const Eigen::VectorXd g = d.G.row(t);
      const Moments m = conditional_nonzero_moments(fits[i], g);
      double var = m.variance;
      if (var < kVarFloor) {
        var = kVarFloor;
        ++guarded;
      }
      const double r = (d.D(t) - m.mean) / var;
      acc += r * r;
      ++count;
    }
    if (count == 0) {
      ++excluded;
      continue;
    }
    us.push_back(acc / count);
  }
  return detail::summarize_capture(std::move(us), guarded, excluded);
}

}  // namespace brushsim
