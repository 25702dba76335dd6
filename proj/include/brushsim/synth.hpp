#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "brushsim/env_model.hpp"
#include "brushsim/features.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

// Generates a corpus with the same shape as the real brushing study
// (n_users users, two sessions a day for n_days days) from randomly drawn
// per-user generative models. Intercepts are calibrated so the aggregate
// moments (missed-window rate around 0.38, mean non-zero duration around
// 140 s) resemble the real data; useful for end-to-end tests when the real
// corpus is not available.
inline Corpus make_synthetic_corpus(int n_users, int n_days, std::uint64_t seed) {
  Corpus corpus;
  Rng rng = make_stream(seed, {0xC0FFEE});
  std::normal_distribution<double> bern_intercept(0.5, 0.9);
  std::normal_distribution<double> pois_intercept(4.9, 0.25);
  std::normal_distribution<double> small_w(0.0, 0.15);

  for (int u = 0; u < n_users; ++u) {
    UserEnvModel model;
    model.cls = ModelClass::Zip;
    model.variant = BaseVariant::Stationary;
    model.bern_w.resize(5);
    model.nonzero_w.resize(5);
    // P(Z=1) = 1 - sigmoid(w0 + ...); w0 ~ -0.5 gives roughly 62% brushing.
    model.bern_w(0) = -bern_intercept(rng);
    model.nonzero_w(0) = pois_intercept(rng);
    for (int j = 1; j < 5; ++j) {
      model.bern_w(j) = small_w(rng);
      model.nonzero_w(j) = small_w(rng);
    }

    UserSessions sessions;
    sessions.user_id = "synth_" + std::string(u < 10 ? "0" : "") + std::to_string(u);
    const int T = n_days * kSessionsPerDay;
    for (int t = 1; t <= T; ++t) {
      std::span<const int> hist(sessions.durations);
      const Eigen::VectorXd g =
          env_baseline_features(hist, t, BaseVariant::Stationary, DayNorm::Fitting);
      // Extra dispersion on top of the Poisson so the corpus is noisier
      // than any single model class, as real data is.
      int d = sample_duration(model, g, rng);
      if (d > 0) {
        std::normal_distribution<double> jitter(0.0, 25.0);
        d = std::max(0, d + static_cast<int>(jitter(rng)));
      }
      sessions.durations.push_back(d);
    }
    corpus.users.push_back(std::move(sessions));
  }
  return corpus;
}

inline void save_corpus_csv(const std::string& path, const Corpus& corpus,
                            const ColumnMap& cols = {}, char delim = ',') {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << cols.user << delim << cols.day << delim << cols.session << delim << cols.duration
      << '\n';
  for (const auto& u : corpus.users) {
    for (int t = 1; t <= u.num_decisions(); ++t) {
      out << u.user_id << delim << day_of_decision(t) << delim << time_of_day(t) << delim
          << u.durations[t - 1] << '\n';
    }
  }
}

}  // namespace brushsim
