#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brushsim/config.hpp"
#include "brushsim/env_check.hpp"
#include "brushsim/env_fit.hpp"
#include "brushsim/harness.hpp"
#include "brushsim/params_io.hpp"
#include "brushsim/sim.hpp"

namespace brushsim {

// Output of the environment-fitting stage: one model per user per variant
// plus the per-variant selection reports.
struct FittedEnvironments {
  std::vector<UserEnvModel> stationary;
  std::vector<UserEnvModel> nonstationary;
  std::vector<SelectionRow> selection_stationary;
  std::vector<SelectionRow> selection_nonstationary;

  const std::vector<UserEnvModel>& pool(BaseVariant v) const {
    return v == BaseVariant::Stationary ? stationary : nonstationary;
  }
};

inline FittedEnvironments fit_all_users(const Corpus& corpus, const FitConfig& cfg,
                                        int weekday_offset, int n_threads = 1) {
  FittedEnvironments out;
  const int n = static_cast<int>(corpus.users.size());
  out.stationary.resize(n);
  out.nonstationary.resize(n);
  out.selection_stationary.resize(n);
  out.selection_nonstationary.resize(n);
  detail::parallel_for(n, n_threads, [&](int i) {
    const auto& user = corpus.users[i];
    for (BaseVariant v : {BaseVariant::Stationary, BaseVariant::NonStationary}) {
      ModelSelection sel = select_model_class(user, v, cfg, weekday_offset);
      SelectionRow row{user.user_id, sel.chosen, sel.zip.rmse, sel.hurdle_sqrt.rmse,
                       sel.hurdle_log.rmse};
      if (v == BaseVariant::Stationary) {
        out.stationary[i] = sel.best().model;
        out.selection_stationary[i] = row;
      } else {
        out.nonstationary[i] = sel.best().model;
        out.selection_nonstationary[i] = row;
      }
    }
  });
  return out;
}

inline std::map<ModelClass, int> class_counts(const std::vector<UserEnvModel>& models) {
  std::map<ModelClass, int> counts;
  for (const auto& m : models) ++counts[m.cls];
  return counts;
}

inline Environment build_environment(const EnvVariantSpec& spec,
                                     const std::vector<UserEnvModel>& pool,
                                     const std::map<ModelClass, ClassEffects>& effects,
                                     EffectSign sign, int weekday_offset) {
  Environment env;
  env.spec = spec;
  env.pool = pool;
  env.effects = effects;
  env.sign = sign;
  env.weekday_offset = weekday_offset;
  return env;
}

// Runs the full (variant x algorithm x cluster size) grid.
inline std::vector<CellResult> run_grid(
    const FittedEnvironments& fits, const std::map<ModelClass, ClassEffects>& effects,
    const RunConfig& cfg) {
  std::vector<CellResult> cells;
  for (const auto& vid : cfg.variants) {
    const EnvVariantSpec spec = variant_from_id(vid);
    const Environment env = build_environment(spec, fits.pool(spec.base), effects,
                                              cfg.effect_sign, cfg.weekend_offset);
    for (const auto& alg : cfg.algorithms) {
      for (int k : cfg.cluster_sizes) {
        cells.push_back(
            run_cell(env, cfg.experiment, alg_from_name(alg), k, cfg.threads));
      }
    }
  }
  return cells;
}

// Machine-readable results table: one row per cell.
inline std::string format_results_table(const std::vector<CellResult>& cells,
                                        const std::vector<int>& checkpoints) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "variant,algorithm,cluster_size,avg_reward_mean,avg_reward_sem,"
         "p25_reward_mean,p25_reward_sem";
  for (int c : checkpoints) out << ",avg_t" << c << "_mean,avg_t" << c << "_sem";
  out << '\n';
  for (const auto& cell : cells) {
    out << cell.variant << ',' << alg_name(cell.alg) << ',' << cell.cluster_size << ','
        << cell.avg_mean << ',' << cell.avg_sem << ',' << cell.p25_mean << ','
        << cell.p25_sem;
    for (std::size_t j = 0; j < cell.checkpoint_mean.size(); ++j)
      out << ',' << cell.checkpoint_mean[j] << ',' << cell.checkpoint_sem[j];
    out << '\n';
  }
  return out.str();
}

inline std::string format_moment_report(const MomentReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "metric,observed,simulated\n";
  out << "missed_proportion," << r.observed.missed_proportion << ','
      << r.simulated.missed_proportion << '\n';
  out << "avg_nonzero_duration," << r.observed.avg_nonzero << ',' << r.simulated.avg_nonzero
      << '\n';
  out << "var_nonzero_duration," << r.observed.var_nonzero << ',' << r.simulated.var_nonzero
      << '\n';
  out << "var_user_mean_duration," << r.observed.var_user_means << ','
      << r.simulated.var_user_means << '\n';
  out << "avg_within_user_variance," << r.observed.avg_within_user_var << ','
      << r.simulated.avg_within_user_var << '\n';
  return out.str();
}

inline std::string format_variance_capture(const VarianceCapture& bern,
                                           const VarianceCapture& nonzero) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "statistic,mean,stddev,ci_low,ci_high,n_users,guarded_terms,excluded_users\n";
  out << "bernoulli," << bern.mean << ',' << bern.stddev << ',' << bern.ci_low << ','
      << bern.ci_high << ',' << bern.n_users << ',' << bern.guarded_terms << ",0\n";
  out << "nonzero," << nonzero.mean << ',' << nonzero.stddev << ',' << nonzero.ci_low << ','
      << nonzero.ci_high << ',' << nonzero.n_users << ',' << nonzero.guarded_terms << ','
      << nonzero.excluded_users << '\n';
  return out.str();
}

// FNV-1a hash of a file's bytes, for run manifests.
inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace brushsim
