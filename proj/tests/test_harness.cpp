#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "brushsim/harness.hpp"

using namespace brushsim;

namespace {

UserEnvModel constant_model(double duration) {
  UserEnvModel m;
  m.cls = ModelClass::HurdleSqrt;
  m.variant = BaseVariant::Stationary;
  m.bern_w = Eigen::VectorXd::Zero(5);
  m.bern_w(0) = -40.0;
  m.nonzero_w = Eigen::VectorXd::Zero(5);
  m.nonzero_w(0) = std::sqrt(duration);
  m.sigma_u = 1e-9;
  return m;
}

Environment constant_env(std::vector<double> durations) {
  Environment env;
  env.spec = {BaseVariant::Stationary, EffectScope::Population};
  for (double d : durations) env.pool.push_back(constant_model(d));
  env.effects[ModelClass::HurdleSqrt] = ClassEffects{};
  return env;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_users = 8;
  cfg.per_week = 4;
  cfg.trials = 2;
  cfg.horizon = 28;
  cfg.update_period = 14;
  cfg.checkpoints = {14, 28};
  cfg.master_seed = 42;
  cfg.blr.eta2 = 625.0;
  cfg.zip_chain.chain_length = 600;
  cfg.zip_chain.burn_in = 300;
  cfg.zip_chain.thin = 3;
  return cfg;
}

}  // namespace

TEST_CASE("percentile interpolates between order statistics") {
  std::vector<double> xs;
  for (int i = 1; i <= 72; ++i) xs.push_back(i);
  CHECK_THAT(percentile(xs, 0.25), Catch::Matchers::WithinAbs(18.75, 1e-12));
  CHECK(percentile(xs, 0.0) == 1.0);
  CHECK(percentile(xs, 1.0) == 72.0);
  CHECK(percentile({5.0}, 0.25) == 5.0);
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
}

TEST_CASE("constant environment yields the constant average") {
  const Environment env = constant_env({120});
  const ExperimentConfig cfg = small_config();
  for (AlgKind alg : {AlgKind::Blr, AlgKind::Zip}) {
    const TrialResult tr = run_trial(env, cfg, alg, 4, 0);
    CHECK(tr.avg_reward == 120.0);
    CHECK(tr.pct25 == 120.0);
    for (double c : tr.checkpoint_avgs) CHECK(c == 120.0);
    CHECK((tr.rewards.array() == 120.0).all());
  }
}

TEST_CASE("trial bookkeeping: entry clusters, decision counts, clipping") {
  const Environment env = constant_env({100, 140});
  const ExperimentConfig cfg = small_config();
  std::map<int, int> decisions_per_user;
  std::map<int, int> cluster_of;
  bool all_clipped = true;
  const auto hook = [&](const DecisionRecord& r) {
    ++decisions_per_user[r.user];
    cluster_of[r.user] = r.cluster;
    if (r.pi < kPiMin || r.pi > kPiMax) all_clipped = false;
    CHECK(r.reward >= 0);
    CHECK(r.reward <= kRewardCap);
  };
  run_trial(env, cfg, AlgKind::Blr, 4, 1, hook);
  REQUIRE(decisions_per_user.size() == 8);
  for (const auto& [u, n] : decisions_per_user) CHECK(n == cfg.horizon);
  // Entry-order clusters of size 4 over 8 users.
  for (int u = 0; u < 8; ++u) CHECK(cluster_of[u] == u / 4);
  CHECK(all_clipped);
}

TEST_CASE("first-block decisions use the prior posterior") {
  // A zero-mean BLR prior gives an unclipped probability of exactly 0.5
  // until the first update at cluster-relative time 14.
  const Environment env = constant_env({120});
  const ExperimentConfig cfg = small_config();
  bool prior_block_ok = true;
  run_trial(env, cfg, AlgKind::Blr, 1, 0, [&](const DecisionRecord& r) {
    if (r.t <= 14 && r.pi != 0.5) prior_block_ok = false;
  });
  CHECK(prior_block_ok);
}

TEST_CASE("trials are deterministic given the seed") {
  const Environment env = constant_env({60, 120, 180});
  ExperimentConfig cfg = small_config();
  const TrialResult a = run_trial(env, cfg, AlgKind::Blr, 4, 3);
  const TrialResult b = run_trial(env, cfg, AlgKind::Blr, 4, 3);
  CHECK(a.rewards.cwiseEqual(b.rewards).all());
  CHECK(a.avg_reward == b.avg_reward);
  const TrialResult c = run_trial(env, cfg, AlgKind::Blr, 4, 4);
  CHECK_FALSE(a.rewards.cwiseEqual(c.rewards).all());  // different trial index
}

TEST_CASE("no pooling isolates users across clusters") {
  // With k = 1, perturbing one pool model must not change the rewards of
  // users mapped to other pool models.
  Environment env_a = constant_env({100, 150});
  Environment env_b = constant_env({100, 40});
  const ExperimentConfig cfg = small_config();

  Rng pop = make_stream(cfg.master_seed, {0, kPopulationStream, 0});
  const auto users = sample_study_population(env_a, cfg.n_users, pop);

  const TrialResult a = run_trial(env_a, cfg, AlgKind::Blr, 1, 0);
  const TrialResult b = run_trial(env_b, cfg, AlgKind::Blr, 1, 0);
  bool any_first_model = false;
  for (int u = 0; u < cfg.n_users; ++u) {
    if (users[u].pool_index == 0) {
      any_first_model = true;
      CHECK(a.rewards.row(u).cwiseEqual(b.rewards.row(u)).all());
    }
  }
  CHECK(any_first_model);
}

TEST_CASE("averages aggregate over users then trials") {
  const Environment env = constant_env({60, 120});
  ExperimentConfig cfg = small_config();
  cfg.trials = 3;
  const CellResult cell = run_cell(env, cfg, AlgKind::Blr, 4);
  REQUIRE(static_cast<int>(cell.trial_avg.size()) == 3);
  // Independent recomputation of the cell summary from the trial values.
  double mean = 0.0;
  for (double v : cell.trial_avg) mean += v;
  mean /= 3.0;
  CHECK_THAT(cell.avg_mean, Catch::Matchers::WithinAbs(mean, 1e-12));
  double var = 0.0;
  for (double v : cell.trial_avg) var += (v - mean) * (v - mean);
  var /= 2.0;
  CHECK_THAT(cell.avg_sem, Catch::Matchers::WithinAbs(std::sqrt(var / 3.0), 1e-12));
  CHECK(cell.checkpoint_mean.size() == cfg.checkpoints.size());
}

TEST_CASE("multithreaded cells match single-threaded cells") {
  const Environment env = constant_env({80, 110, 140});
  ExperimentConfig cfg = small_config();
  cfg.trials = 4;
  const CellResult one = run_cell(env, cfg, AlgKind::Blr, 4, 1);
  const CellResult four = run_cell(env, cfg, AlgKind::Blr, 4, 4);
  CHECK(one.trial_avg == four.trial_avg);
  CHECK(one.trial_p25 == four.trial_p25);
}

TEST_CASE("turning off common random numbers changes the draws") {
  const Environment env = constant_env({60, 120, 180});
  ExperimentConfig crn = small_config();
  ExperimentConfig no_crn = crn;
  no_crn.common_random_numbers = false;
  const TrialResult a = run_trial(env, crn, AlgKind::Blr, 4, 0);
  const TrialResult b = run_trial(env, no_crn, AlgKind::Blr, 4, 0);
  CHECK_FALSE(a.rewards.cwiseEqual(b.rewards).all());
}

TEST_CASE("configuration validation") {
  ExperimentConfig cfg = small_config();
  cfg.n_users = 7;  // not a multiple of per_week
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.checkpoints = {29};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.update_period = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("algorithm names round trip") {
  CHECK(alg_from_name("BLR") == AlgKind::Blr);
  CHECK(alg_from_name("zip") == AlgKind::Zip);
  CHECK(std::string(alg_name(AlgKind::Zip)) == "ZIP");
  CHECK_THROWS_AS(alg_from_name("ucb"), std::invalid_argument);
}
