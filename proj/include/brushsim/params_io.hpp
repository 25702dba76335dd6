#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brushsim/effects.hpp"
#include "brushsim/env_fit.hpp"
#include "brushsim/env_model.hpp"

namespace brushsim {

inline const char* variant_name(BaseVariant v) {
  return v == BaseVariant::Stationary ? "stationary" : "nonstationary";
}

inline BaseVariant variant_from_name(const std::string& s) {
  if (s == "stationary") return BaseVariant::Stationary;
  if (s == "nonstationary") return BaseVariant::NonStationary;
  throw std::invalid_argument("unknown variant: " + s);
}

// Transform convention that produced the non-zero weights of an imported
// record; recorded so loaded parameter files are self-describing.
inline const char* nonzero_transform_name(ModelClass c) {
  switch (c) {
    case ModelClass::Zip: return "none";
    case ModelClass::HurdleSqrt: return "sqrt";
    case ModelClass::HurdleLog: return "log";
  }
  return "?";
}

// Flat one-record-per-line parameter file:
//   user_id,variant,model_class,nonzero_transform,sigma_u,w_b...,|,w_nz...
inline void save_env_params(const std::string& path, const std::vector<UserEnvModel>& models) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "user_id,variant,model_class,nonzero_transform,sigma_u,bern_w,nonzero_w\n";
  for (const auto& m : models) {
    out << m.user_id << ',' << variant_name(m.variant) << ',' << model_class_name(m.cls)
        << ',' << nonzero_transform_name(m.cls) << ',' << m.sigma_u << ',';
    for (Eigen::Index i = 0; i < m.bern_w.size(); ++i)
      out << (i ? ";" : "") << m.bern_w(i);
    out << ',';
    for (Eigen::Index i = 0; i < m.nonzero_w.size(); ++i)
      out << (i ? ";" : "") << m.nonzero_w(i);
    out << '\n';
  }
}

namespace detail {

inline Eigen::VectorXd parse_weight_list(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';')) vals.push_back(std::stod(tok));
  Eigen::VectorXd w(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) w(i) = vals[i];
  return w;
}

}  // namespace detail

inline std::vector<UserEnvModel> load_env_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty parameter file: " + path);
  std::vector<UserEnvModel> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string user, variant, cls, transform, sigma, wb, wnz;
    std::getline(ss, user, ',');
    std::getline(ss, variant, ',');
    std::getline(ss, cls, ',');
    std::getline(ss, transform, ',');
    std::getline(ss, sigma, ',');
    std::getline(ss, wb, ',');
    std::getline(ss, wnz, ',');
    UserEnvModel m;
    m.user_id = user;
    m.variant = variant_from_name(variant);
    m.cls = model_class_from_name(cls);
    m.sigma_u = std::stod(sigma);
    m.bern_w = detail::parse_weight_list(wb);
    m.nonzero_w = detail::parse_weight_list(wnz);
    if (m.bern_w.size() != env_baseline_dim(m.variant) ||
        m.nonzero_w.size() != env_baseline_dim(m.variant))
      throw std::runtime_error("weight dimension mismatch for user " + user);
    out.push_back(std::move(m));
  }
  return out;
}

inline void save_effects(const std::string& path,
                         const std::map<ModelClass, ClassEffects>& effects) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "model_class,delta_b,delta_n,sigma_b,sigma_n,n_users\n";
  for (const auto& [cls, e] : effects)
    out << model_class_name(cls) << ',' << e.delta_b << ',' << e.delta_n << ','
        << e.sigma_b << ',' << e.sigma_n << ',' << e.n_users << '\n';
}

inline std::map<ModelClass, ClassEffects> load_effects(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::map<ModelClass, ClassEffects> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cls, db, dn, sb, sn, n;
    std::getline(ss, cls, ',');
    std::getline(ss, db, ',');
    std::getline(ss, dn, ',');
    std::getline(ss, sb, ',');
    std::getline(ss, sn, ',');
    std::getline(ss, n, ',');
    out[model_class_from_name(cls)] = {std::stod(db), std::stod(dn), std::stod(sb),
                                       std::stod(sn), std::stoi(n)};
  }
  return out;
}

struct SelectionRow {
  std::string user_id;
  ModelClass chosen = ModelClass::Zip;
  double rmse_zip = 0.0, rmse_sqrt = 0.0, rmse_log = 0.0;
};

inline void save_selection_report(const std::string& path,
                                  const std::vector<SelectionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(10);
  out << "user_id,chosen_class,rmse_zip,rmse_hurdle_sqrt,rmse_hurdle_log\n";
  for (const auto& r : rows)
    out << r.user_id << ',' << model_class_name(r.chosen) << ',' << r.rmse_zip << ','
        << r.rmse_sqrt << ',' << r.rmse_log << '\n';
}

// Reward noise variance used by the linear reward model: the sample
// variance of capped durations over all corpus sessions.
inline double corpus_reward_variance(const Corpus& corpus, int cap = 180) {
  std::vector<double> rewards;
  for (const auto& u : corpus.users)
    for (int d : u.durations) rewards.push_back(std::min(d, cap));
  return sample_variance(rewards.data(), rewards.size());
}

}  // namespace brushsim
