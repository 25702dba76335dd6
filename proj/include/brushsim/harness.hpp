#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "brushsim/bandit.hpp"
#include "brushsim/blr.hpp"
#include "brushsim/sim.hpp"
#include "brushsim/zip_alg.hpp"

namespace brushsim {

enum class AlgKind { Blr, Zip };

inline const char* alg_name(AlgKind a) { return a == AlgKind::Blr ? "BLR" : "ZIP"; }

inline AlgKind alg_from_name(const std::string& s) {
  if (s == "BLR" || s == "blr") return AlgKind::Blr;
  if (s == "ZIP" || s == "zip") return AlgKind::Zip;
  throw std::invalid_argument("unknown algorithm: " + s);
}

struct ExperimentConfig {
  int n_users = 72;
  int per_week = 4;        // incremental recruitment rate
  int trials = 100;
  int horizon = 140;       // decision times per user
  int update_period = 14;  // cluster-relative decision times between updates
  std::vector<int> checkpoints = {20, 40, 60, 80, 100, 120, 140};
  std::uint64_t master_seed = 0;
  bool common_random_numbers = true;
  bool random_clusters = false;
  BlrConfig blr;
  ZipChainConfig zip_chain;

  void validate() const {
    if (n_users < 1 || per_week < 1 || n_users % per_week != 0)
      throw std::invalid_argument("n_users must be a positive multiple of per_week");
    if (horizon < 1 || update_period < 1)
      throw std::invalid_argument("horizon and update_period must be positive");
    for (int c : checkpoints)
      if (c < 1 || c > horizon)
        throw std::invalid_argument("checkpoint outside [1, horizon]");
  }
};

struct TrialResult {
  Eigen::MatrixXd rewards;  // n_users x horizon
  double avg_reward = 0.0;
  double pct25 = 0.0;
  std::vector<double> checkpoint_avgs;
};

// Linear interpolation between order statistics (0 <= q <= 1).
inline double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

namespace detail {

struct AlgInstance {
  AlgKind kind = AlgKind::Blr;
  BlrPosterior blr;
  ZipPosteriorDraws zip;
  History history;
  Rng rng;

  double action_prob(const AlgFeatures& af) const {
    return kind == AlgKind::Blr ? blr_action_prob(blr, af.f)
                                : zip_action_prob(zip, af.m, af.f);
  }
};

}  // namespace detail

// Hook invoked after every decision; used for trajectory logging and
// invariant checks in tests.
struct DecisionRecord {
  int user = 0;
  int t = 0;  // user-relative decision time
  int cluster = 0;
  AlgFeatures alg_feats;
  int action = 0;
  double pi = 0.0;
  int duration = 0;
  int reward = 0;
};

using DecisionHook = std::function<void(const DecisionRecord&)>;

// Runs one Monte Carlo trial: users enter in weekly cohorts, clusters are
// formed by entry order (or at random), and each cluster's algorithm
// updates on the pooled cluster history every update_period cluster-relative
// decision times.
inline TrialResult run_trial(const Environment& env, const ExperimentConfig& cfg,
                             AlgKind alg, int cluster_size, int trial,
                             const DecisionHook& hook = {}) {
  cfg.validate();
  const int n = cfg.n_users;
  const int T = cfg.horizon;
  const std::uint64_t cell_tag =
      cfg.common_random_numbers
          ? 0
          : 1000 + 10 * static_cast<std::uint64_t>(alg) + cluster_size;

  Rng pop_rng = make_stream(cfg.master_seed,
                            {static_cast<std::uint64_t>(trial), kPopulationStream, cell_tag});
  const std::vector<SimUser> users = sample_study_population(env, n, pop_rng);

  // Entry schedule: user u enters in week u / per_week; its first decision
  // happens at global slot 2 * 7 * week.
  std::vector<int> start_slot(n);
  for (int u = 0; u < n; ++u)
    start_slot[u] = (u / cfg.per_week) * 7 * kSessionsPerDay;

  // Cluster assignment over user indices.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.random_clusters) std::shuffle(order.begin(), order.end(), pop_rng);
  const int n_clusters = (n + cluster_size - 1) / cluster_size;
  std::vector<std::vector<int>> clusters(n_clusters);
  std::vector<int> cluster_of(n);
  for (int i = 0; i < n; ++i) {
    clusters[i / cluster_size].push_back(order[i]);
    cluster_of[order[i]] = i / cluster_size;
  }

  std::vector<detail::AlgInstance> instances(n_clusters);
  std::vector<int> cluster_start(n_clusters, std::numeric_limits<int>::max());
  std::vector<int> cluster_end(n_clusters, 0);
  for (int c = 0; c < n_clusters; ++c) {
    auto& inst = instances[c];
    inst.kind = alg;
    inst.rng = make_stream(cfg.master_seed, {static_cast<std::uint64_t>(trial), kAlgStream,
                                             static_cast<std::uint64_t>(alg),
                                             static_cast<std::uint64_t>(c), cell_tag});
    if (alg == AlgKind::Blr) {
      inst.blr = blr_prior(cfg.blr);
    } else {
      inst.zip = zip_prior_draws(cfg.zip_chain, inst.rng);
    }
    for (int u : clusters[c]) {
      cluster_start[c] = std::min(cluster_start[c], start_slot[u]);
      cluster_end[c] = std::max(cluster_end[c], start_slot[u] + T);
    }
  }

  std::vector<Rng> env_rng;
  env_rng.reserve(n);
  for (int u = 0; u < n; ++u)
    env_rng.push_back(make_stream(cfg.master_seed, {static_cast<std::uint64_t>(trial),
                                                    kEnvStream,
                                                    static_cast<std::uint64_t>(u), cell_tag}));

  std::vector<std::vector<int>> durations(n);
  TrialResult res;
  res.rewards.setZero(n, T);

  const int last_slot = *std::max_element(cluster_end.begin(), cluster_end.end());
  for (int s = 0; s < last_slot; ++s) {
    for (int c = 0; c < n_clusters; ++c) {
      for (int u : clusters[c]) {
        if (s < start_slot[u] || s >= start_slot[u] + T) continue;
        const int t = s - start_slot[u] + 1;
        std::span<const int> hist(durations[u]);
        const AlgFeatures af = alg_features(hist, t, env.weekday_offset);
        const double pi = clip_prob(instances[c].action_prob(af));
        const int a = select_action(pi, instances[c].rng);
        const EnvState st = advance(env, hist, t, DayNorm::Generation);
        const StepOutcome outcome = step(env, users[u], st.g, st.h, a, env_rng[u]);
        durations[u].push_back(outcome.duration);
        res.rewards(u, t - 1) = outcome.reward;
        instances[c].history.push_back(
            {af.f, af.m, a, pi, static_cast<double>(outcome.reward)});
        if (hook) hook({u, t, c, af, a, pi, outcome.duration, outcome.reward});
      }
      // Weekly posterior refit from the full pooled cluster history.
      const int rel = s - cluster_start[c] + 1;
      if (s >= cluster_start[c] && s < cluster_end[c] && rel % cfg.update_period == 0) {
        if (alg == AlgKind::Blr) {
          instances[c].blr = blr_update(instances[c].history, cfg.blr);
        } else {
          instances[c].zip =
              zip_mh_update(instances[c].history, cfg.zip_chain, instances[c].rng);
        }
      }
    }
  }

  std::vector<double> user_avgs(n);
  for (int u = 0; u < n; ++u) user_avgs[u] = res.rewards.row(u).mean();
  res.avg_reward =
      std::accumulate(user_avgs.begin(), user_avgs.end(), 0.0) / static_cast<double>(n);
  res.pct25 = percentile(user_avgs, 0.25);
  res.checkpoint_avgs.reserve(cfg.checkpoints.size());
  for (int t0 : cfg.checkpoints)
    res.checkpoint_avgs.push_back(res.rewards.leftCols(t0).mean());
  return res;
}

struct CellResult {
  std::string variant;
  AlgKind alg = AlgKind::Blr;
  int cluster_size = 0;
  double avg_mean = 0.0, avg_sem = 0.0;
  double p25_mean = 0.0, p25_sem = 0.0;
  std::vector<double> checkpoint_mean, checkpoint_sem;
  std::vector<double> trial_avg, trial_p25;
};

namespace detail {

inline std::pair<double, double> mean_sem(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  return {mean, std::sqrt(sample_variance(xs.data(), xs.size()) / n)};
}

inline void parallel_for(int count, int n_threads, const std::function<void(int)>& body) {
  if (n_threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < std::min(n_threads, count); ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Runs all trials of one (variant, algorithm, cluster size) cell.
inline CellResult run_cell(const Environment& env, const ExperimentConfig& cfg, AlgKind alg,
                           int cluster_size, int n_threads = 1) {
  CellResult cell;
  cell.variant = variant_id(env.spec);
  cell.alg = alg;
  cell.cluster_size = cluster_size;
  cell.trial_avg.resize(cfg.trials);
  cell.trial_p25.resize(cfg.trials);
  std::vector<std::vector<double>> cp(cfg.trials);
  detail::parallel_for(cfg.trials, n_threads, [&](int trial) {
    TrialResult tr = run_trial(env, cfg, alg, cluster_size, trial);
    cell.trial_avg[trial] = tr.avg_reward;
    cell.trial_p25[trial] = tr.pct25;
    cp[trial] = std::move(tr.checkpoint_avgs);
  });
  std::tie(cell.avg_mean, cell.avg_sem) = detail::mean_sem(cell.trial_avg);
  std::tie(cell.p25_mean, cell.p25_sem) = detail::mean_sem(cell.trial_p25);
  for (std::size_t j = 0; j < cfg.checkpoints.size(); ++j) {
    std::vector<double> col(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) col[i] = cp[i][j];
    auto [m, s] = detail::mean_sem(col);
    cell.checkpoint_mean.push_back(m);
    cell.checkpoint_sem.push_back(s);
  }
  return cell;
}

}  // namespace brushsim
