// Batch interface for the brushing-intervention simulation testbed:
// fit per-user environment models, check environment quality, and run the
// algorithm-comparison experiment grid.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "brushsim/pipeline.hpp"
#include "brushsim/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::string output_dir_override;
  int threads_override = -1;
  int trials_override = -1;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
};

brushsim::RunConfig load_config(const CliOptions& opt) {
  brushsim::RunConfig cfg = brushsim::load_run_config(opt.config_path);
  if (!opt.output_dir_override.empty()) cfg.output_dir = opt.output_dir_override;
  if (opt.threads_override >= 0) cfg.threads = opt.threads_override;
  if (opt.trials_override >= 0) cfg.experiment.trials = opt.trials_override;
  if (opt.has_seed_override) cfg.experiment.master_seed = opt.seed_override;
  return cfg;
}

std::string params_path(const brushsim::RunConfig& cfg) {
  return cfg.load_published_params.empty()
             ? (fs::path(cfg.output_dir) / "env_params.csv").string()
             : cfg.load_published_params;
}

std::string effects_path(const brushsim::RunConfig& cfg) {
  return cfg.load_published_effects.empty()
             ? (fs::path(cfg.output_dir) / "effect_sizes.csv").string()
             : cfg.load_published_effects;
}

brushsim::Corpus load_corpus_from(const brushsim::RunConfig& cfg) {
  return brushsim::load_corpus(cfg.corpus.path, cfg.corpus.columns, cfg.corpus.delimiter);
}

brushsim::FittedEnvironments load_fitted(const brushsim::RunConfig& cfg) {
  brushsim::FittedEnvironments fits;
  for (auto& m : brushsim::load_env_params(params_path(cfg))) {
    (m.variant == brushsim::BaseVariant::Stationary ? fits.stationary : fits.nonstationary)
        .push_back(std::move(m));
  }
  if (fits.stationary.empty())
    throw std::runtime_error("no stationary records in " + params_path(cfg));
  return fits;
}

void write_manifest(const brushsim::RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["master_seed"] = cfg.experiment.master_seed;
  m["fit_seed"] = cfg.fit.seed;
  m["check_seed"] = cfg.check.seed;
  m["trials"] = cfg.experiment.trials;
  m["threads"] = cfg.threads;
  m["effect_sign"] =
      cfg.effect_sign == brushsim::EffectSign::Beneficial ? "beneficial" : "literal";
  m["common_random_numbers"] = cfg.experiment.common_random_numbers;
  m["random_clusters"] = cfg.experiment.random_clusters;
  m["variants"] = cfg.variants;
  m["algorithms"] = cfg.algorithms;
  m["cluster_sizes"] = cfg.cluster_sizes;
  json in_hashes = json::object();
  for (const auto& p : inputs) in_hashes[p] = brushsim::file_hash(p);
  m["input_hashes"] = in_hashes;
  m["outputs"] = outputs;
  std::ofstream out(fs::path(cfg.output_dir) / ("manifest_" + command + ".json"));
  out << m.dump(2) << '\n';
}

int cmd_fit_env(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  fs::create_directories(cfg.output_dir);
  if (!cfg.load_published_params.empty()) {
    // Pinned-environment mode: pass the published records through.
    auto models = brushsim::load_env_params(cfg.load_published_params);
    std::cout << "loaded " << models.size() << " published records from "
              << cfg.load_published_params << ", fitting skipped\n";
    write_manifest(cfg, "fit-env", {cfg.load_published_params}, {});
    return 0;
  }
  const auto corpus = load_corpus_from(cfg);
  std::cout << "corpus: " << corpus.users.size() << " users\n";
  const auto fits =
      brushsim::fit_all_users(corpus, cfg.fit, cfg.weekend_offset, cfg.threads);

  std::vector<brushsim::UserEnvModel> all = fits.stationary;
  all.insert(all.end(), fits.nonstationary.begin(), fits.nonstationary.end());
  const std::string ppath = (fs::path(cfg.output_dir) / "env_params.csv").string();
  brushsim::save_env_params(ppath, all);
  brushsim::save_selection_report(
      (fs::path(cfg.output_dir) / "selection_stationary.csv").string(),
      fits.selection_stationary);
  brushsim::save_selection_report(
      (fs::path(cfg.output_dir) / "selection_nonstationary.csv").string(),
      fits.selection_nonstationary);
  const auto effects = brushsim::population_effect_sizes(fits.stationary);
  const std::string epath = (fs::path(cfg.output_dir) / "effect_sizes.csv").string();
  brushsim::save_effects(epath, effects);

  for (auto variant : {brushsim::BaseVariant::Stationary, brushsim::BaseVariant::NonStationary}) {
    const auto counts = brushsim::class_counts(fits.pool(variant));
    std::cout << brushsim::variant_name(variant) << " class counts:";
    for (const auto& [cls, n] : counts)
      std::cout << ' ' << brushsim::model_class_name(cls) << '=' << n;
    std::cout << '\n';
  }
  write_manifest(cfg, "fit-env", {cfg.corpus.path}, {ppath, epath});
  return 0;
}

int cmd_check_env(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  fs::create_directories(cfg.output_dir);
  const auto corpus = load_corpus_from(cfg);
  const auto fits = load_fitted(cfg);
  std::vector<std::string> outputs;
  for (auto variant : {brushsim::BaseVariant::Stationary, brushsim::BaseVariant::NonStationary}) {
    const auto& pool = fits.pool(variant);
    if (pool.size() != corpus.users.size())
      throw std::runtime_error("fitted pool and corpus user counts differ");
    brushsim::Environment env;
    env.spec = {variant, brushsim::EffectScope::Population};
    env.pool = pool;
    env.weekday_offset = cfg.weekend_offset;
    auto rng = brushsim::make_stream(cfg.check.seed, {static_cast<std::uint64_t>(variant)});
    const auto report = brushsim::moment_report(env, corpus, cfg.check.replicates, rng);
    const auto bern = brushsim::variance_capture_bernoulli(pool, corpus, cfg.weekend_offset);
    const auto nonzero = brushsim::variance_capture_nonzero(pool, corpus, cfg.weekend_offset);

    const std::string tag = brushsim::variant_name(variant);
    const std::string mpath = (fs::path(cfg.output_dir) / ("moments_" + tag + ".csv")).string();
    const std::string vpath =
        (fs::path(cfg.output_dir) / ("variance_capture_" + tag + ".csv")).string();
    std::ofstream(mpath) << brushsim::format_moment_report(report);
    std::ofstream(vpath) << brushsim::format_variance_capture(bern, nonzero);
    outputs.push_back(mpath);
    outputs.push_back(vpath);
    std::cout << tag << ": missed(obs)=" << report.observed.missed_proportion
              << " missed(sim)=" << report.simulated.missed_proportion
              << " U_bern=" << bern.mean << " U_nonzero=" << nonzero.mean << '\n';
  }
  write_manifest(cfg, "check-env", {cfg.corpus.path, params_path(cfg)}, outputs);
  return 0;
}

int cmd_simulate(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  fs::create_directories(cfg.output_dir);
  const auto corpus = load_corpus_from(cfg);
  const auto fits = load_fitted(cfg);
  const auto effects = brushsim::load_effects(effects_path(cfg));

  auto experiment = cfg;
  experiment.experiment.blr.eta2 = brushsim::corpus_reward_variance(corpus);
  std::cout << "reward noise variance eta^2 = " << experiment.experiment.blr.eta2 << '\n';

  const auto cells = brushsim::run_grid(fits, effects, experiment);
  const std::string rpath = (fs::path(cfg.output_dir) / "results.csv").string();
  std::ofstream(rpath) << brushsim::format_results_table(cells,
                                                         cfg.experiment.checkpoints);
  for (const auto& cell : cells) {
    std::cout << cell.variant << ' ' << brushsim::alg_name(cell.alg)
              << " k=" << cell.cluster_size << ": avg=" << std::fixed
              << std::setprecision(3) << cell.avg_mean << " (" << cell.avg_sem
              << ") p25=" << cell.p25_mean << " (" << cell.p25_sem << ")\n";
  }
  write_manifest(cfg, "simulate", {cfg.corpus.path, params_path(cfg), effects_path(cfg)},
                 {rpath});
  return 0;
}

int cmd_report(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw brushsim::ConfigError("cannot open results file: " + results_path);
  std::string line;
  std::getline(in, line);
  std::cout << std::left << std::setw(8) << "variant" << std::setw(6) << "alg"
            << std::setw(5) << "k" << std::setw(20) << "avg (sem)" << std::setw(20)
            << "p25 (sem)" << '\n';
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string variant, alg, k, am, as, pm, ps;
    std::getline(ss, variant, ',');
    std::getline(ss, alg, ',');
    std::getline(ss, k, ',');
    std::getline(ss, am, ',');
    std::getline(ss, as, ',');
    std::getline(ss, pm, ',');
    std::getline(ss, ps, ',');
    auto fmt = [](const std::string& m, const std::string& s) {
      std::ostringstream o;
      o << std::fixed << std::setprecision(3) << std::stod(m) << " (" << std::stod(s) << ")";
      return o.str();
    };
    std::cout << std::left << std::setw(8) << variant << std::setw(6) << alg << std::setw(5)
              << k << std::setw(20) << fmt(am, as) << std::setw(20) << fmt(pm, ps) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brushing-intervention bandit simulation testbed"};
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "run config JSON")->required();
    sub->add_option("-o,--output-dir", opt.output_dir_override, "override output directory");
    sub->add_option("--threads", opt.threads_override, "override worker thread count");
    sub->add_option("--trials", opt.trials_override, "override Monte Carlo trial count");
    sub->add_option("--seed", opt.seed_override, "override master seed")
        ->each([&](const std::string&) { opt.has_seed_override = true; });
  };

  auto* fit = app.add_subcommand("fit-env", "fit per-user environment models");
  add_common(fit);
  auto* check = app.add_subcommand("check-env", "environment quality diagnostics");
  add_common(check);
  auto* simulate = app.add_subcommand("simulate", "run the experiment grid");
  add_common(simulate);

  std::string results_path;
  auto* report = app.add_subcommand("report", "pretty-print a results table");
  report->add_option("results", results_path, "results.csv from simulate")->required();

  std::string synth_out = "synthetic_corpus.csv";
  int synth_users = 32, synth_days = 28;
  std::uint64_t synth_seed = 42;
  auto* synth = app.add_subcommand("synth-corpus", "generate a synthetic test corpus");
  synth->add_option("-o,--output", synth_out, "output CSV path");
  synth->add_option("--users", synth_users, "number of users");
  synth->add_option("--days", synth_days, "days per user");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit_env(opt);
    if (check->parsed()) return cmd_check_env(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (report->parsed()) return cmd_report(results_path);
    if (synth->parsed()) {
      const auto corpus = brushsim::make_synthetic_corpus(synth_users, synth_days, synth_seed);
      brushsim::save_corpus_csv(synth_out, corpus);
      std::cout << "wrote " << synth_out << " (" << corpus.users.size() << " users x "
                << synth_days * brushsim::kSessionsPerDay << " sessions)\n";
      return 0;
    }
  } catch (const brushsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const brushsim::SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const brushsim::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const brushsim::IntegrityError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
