#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "brushsim/effects.hpp"
#include "brushsim/env_fit.hpp"
#include "brushsim/features.hpp"
#include "brushsim/harness.hpp"

namespace brushsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorpusConfig {
  std::string path;
  char delimiter = ',';
  ColumnMap columns;
};

struct CheckConfig {
  int replicates = 100;
  std::uint64_t seed = 77;
};

struct RunConfig {
  CorpusConfig corpus;
  int weekend_offset = 0;
  std::string output_dir = "out";
  int threads = 1;
  FitConfig fit;
  std::string load_published_params;   // when set, fitting is bypassed
  std::string load_published_effects;  // optional companion effects file
  EffectSign effect_sign = EffectSign::Beneficial;
  std::vector<std::string> variants = {"S_Het", "NS_Het", "S_Pop", "NS_Pop"};
  std::vector<std::string> algorithms = {"BLR", "ZIP"};
  std::vector<int> cluster_sizes = {1, 4, 72};
  ExperimentConfig experiment;
  CheckConfig check;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

template <typename T>
void maybe_get(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using nlohmann::json;
  RunConfig cfg;
  detail::require_keys(j, "", {"corpus", "weekend_offset", "output_dir", "threads", "fit",
                               "load_published_params", "load_published_effects",
                               "effect_sign", "experiment", "blr", "zip_chain", "check"});

  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    detail::require_keys(c, "corpus.", {"path", "delimiter", "columns"});
    detail::maybe_get(c, "path", cfg.corpus.path);
    if (c.contains("delimiter")) {
      const std::string d = c.at("delimiter").get<std::string>();
      if (d.size() != 1) throw ConfigError("corpus.delimiter must be one character");
      cfg.corpus.delimiter = d[0];
    }
    if (c.contains("columns")) {
      const auto& cols = c.at("columns");
      detail::require_keys(cols, "corpus.columns.", {"user", "day", "session", "duration"});
      detail::maybe_get(cols, "user", cfg.corpus.columns.user);
      detail::maybe_get(cols, "day", cfg.corpus.columns.day);
      detail::maybe_get(cols, "session", cfg.corpus.columns.session);
      detail::maybe_get(cols, "duration", cfg.corpus.columns.duration);
    }
  }
  detail::maybe_get(j, "weekend_offset", cfg.weekend_offset);
  detail::maybe_get(j, "output_dir", cfg.output_dir);
  detail::maybe_get(j, "threads", cfg.threads);
  detail::maybe_get(j, "load_published_params", cfg.load_published_params);
  detail::maybe_get(j, "load_published_effects", cfg.load_published_effects);
  if (j.contains("effect_sign")) {
    const std::string s = j.at("effect_sign").get<std::string>();
    if (s == "beneficial")
      cfg.effect_sign = EffectSign::Beneficial;
    else if (s == "literal")
      cfg.effect_sign = EffectSign::Literal;
    else
      throw ConfigError("effect_sign must be 'beneficial' or 'literal'");
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    detail::require_keys(f, "fit.", {"restarts", "max_iter", "grad_tol", "prior_scale", "seed"});
    detail::maybe_get(f, "restarts", cfg.fit.restarts);
    detail::maybe_get(f, "max_iter", cfg.fit.max_iter);
    detail::maybe_get(f, "grad_tol", cfg.fit.grad_tol);
    detail::maybe_get(f, "prior_scale", cfg.fit.prior_scale);
    detail::maybe_get(f, "seed", cfg.fit.seed);
  }
  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    detail::require_keys(e, "experiment.",
                         {"variants", "algorithms", "cluster_sizes", "trials", "n_users",
                          "per_week", "horizon", "update_period", "checkpoints",
                          "master_seed", "common_random_numbers", "random_clusters"});
    detail::maybe_get(e, "variants", cfg.variants);
    detail::maybe_get(e, "algorithms", cfg.algorithms);
    detail::maybe_get(e, "cluster_sizes", cfg.cluster_sizes);
    detail::maybe_get(e, "trials", cfg.experiment.trials);
    detail::maybe_get(e, "n_users", cfg.experiment.n_users);
    detail::maybe_get(e, "per_week", cfg.experiment.per_week);
    detail::maybe_get(e, "horizon", cfg.experiment.horizon);
    detail::maybe_get(e, "update_period", cfg.experiment.update_period);
    detail::maybe_get(e, "checkpoints", cfg.experiment.checkpoints);
    detail::maybe_get(e, "master_seed", cfg.experiment.master_seed);
    detail::maybe_get(e, "common_random_numbers", cfg.experiment.common_random_numbers);
    detail::maybe_get(e, "random_clusters", cfg.experiment.random_clusters);
  }
  if (j.contains("blr")) {
    const auto& b = j.at("blr");
    detail::require_keys(b, "blr.", {"sigma_prior"});
    detail::maybe_get(b, "sigma_prior", cfg.experiment.blr.sigma_prior);
  }
  if (j.contains("zip_chain")) {
    const auto& z = j.at("zip_chain");
    detail::require_keys(z, "zip_chain.",
                         {"sigma_prior", "chain_length", "burn_in", "thin", "target_accept",
                          "init_step", "adapt_interval"});
    detail::maybe_get(z, "sigma_prior", cfg.experiment.zip_chain.sigma_prior);
    detail::maybe_get(z, "chain_length", cfg.experiment.zip_chain.chain_length);
    detail::maybe_get(z, "burn_in", cfg.experiment.zip_chain.burn_in);
    detail::maybe_get(z, "thin", cfg.experiment.zip_chain.thin);
    detail::maybe_get(z, "target_accept", cfg.experiment.zip_chain.target_accept);
    detail::maybe_get(z, "init_step", cfg.experiment.zip_chain.init_step);
    detail::maybe_get(z, "adapt_interval", cfg.experiment.zip_chain.adapt_interval);
  }
  if (j.contains("check")) {
    const auto& c = j.at("check");
    detail::require_keys(c, "check.", {"replicates", "seed"});
    detail::maybe_get(c, "replicates", cfg.check.replicates);
    detail::maybe_get(c, "seed", cfg.check.seed);
  }
  if (cfg.variants.empty() || cfg.algorithms.empty() || cfg.cluster_sizes.empty())
    throw ConfigError("experiment grid must be non-empty");
  for (const auto& v : cfg.variants) variant_from_id(v);      // validate early
  for (const auto& a : cfg.algorithms) alg_from_name(a);
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_run_config(j);
}

}  // namespace brushsim
