#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "brushsim/env_model.hpp"
#include "brushsim/features.hpp"
#include "brushsim/rng.hpp"

namespace brushsim {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitConfig {
  int restarts = 20;
  int max_iter = 500;
  double grad_tol = 1e-6;
  double prior_scale = 1.0;  // prior w ~ N(0, prior_scale^2 I)
  std::uint64_t seed = 0;
};

struct FitResult {
  UserEnvModel model;
  double log_posterior = -std::numeric_limits<double>::infinity();
  double rmse = 0.0;
  int restarts_used = 0;
  bool converged = false;
};

namespace detail {

// Quasi-Newton (dense BFGS) ascent with backtracking line search. The
// objective returns the value and fills the gradient. Deterministic given
// the start point; the parameter dimension is at most a dozen, so a dense
// inverse-Hessian approximation is cheap.
struct AscentResult {
  Eigen::VectorXd w;
  double value = -std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

template <typename Objective>
AscentResult maximize(const Objective& objective, Eigen::VectorXd w, int max_iter,
                      double grad_tol) {
  AscentResult res;
  const Eigen::Index n = w.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad(n), g_try(n);
  double value = objective(w, grad);
  bool scaled = false;
  for (int it = 0; it < max_iter; ++it) {
    if (grad.norm() < grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = H * grad;
    double slope = grad.dot(dir);
    if (!(slope > 0.0)) {  // numerical loss of positive definiteness
      H.setIdentity();
      dir = grad;
      slope = grad.squaredNorm();
    }
    double step = 1.0;
    Eigen::VectorXd w_try;
    double v_try = -std::numeric_limits<double>::infinity();
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      w_try = w + step * dir;
      v_try = objective(w_try, g_try);
      if (std::isfinite(v_try) && v_try >= value + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const Eigen::VectorXd s = w_try - w;
    const Eigen::VectorXd y = grad - g_try;  // curvature in minimization convention
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd K =
          Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      H = K * H * K.transpose() + rho * s * s.transpose();
    }
    w = std::move(w_try);
    grad = g_try;
    value = v_try;
  }
  res.w = std::move(w);
  res.value = value;
  res.grad_norm = grad.norm();
  return res;
}

// Log posterior (and gradient) of the joint ZIP fit; w = [w_b; w_p].
inline double zip_log_posterior(const Eigen::VectorXd& w, const Eigen::MatrixXd& G,
                                const Eigen::VectorXi& D, double prior_scale,
                                Eigen::VectorXd& grad) {
  const Eigen::Index k = G.cols();
  const Eigen::VectorXd wb = w.head(k);
  const Eigen::VectorXd wp = w.tail(k);
  double ll = 0.0;
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd gp = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    const auto g = G.row(i);
    const double xb = clamp_lin(g.dot(wb));
    const double xp = clamp_lin(g.dot(wp));
    const double s = 1.0 / (1.0 + std::exp(-xb));  // sigmoid = P(Z=0)
    const double lambda = std::exp(xp);
    const int d = D(i);
    if (d == 0) {
      const double elam = std::exp(-lambda);
      const double denom = s + (1.0 - s) * elam;
      ll += std::log(denom);
      const double ds = s * (1.0 - s);
      gb += g.transpose() * (ds * (1.0 - elam) / denom);
      gp += g.transpose() * (-(1.0 - s) * elam * lambda / denom);
    } else {
      ll += std::log(std::max(1.0 - s, 1e-300)) - lambda + d * xp - log_factorial(d);
      gb += g.transpose() * (-s);
      gp += g.transpose() * (d - lambda);
    }
  }
  const double inv_var = 1.0 / (prior_scale * prior_scale);
  ll += -0.5 * inv_var * w.squaredNorm();
  grad.head(k) = gb - inv_var * wb;
  grad.tail(k) = gp - inv_var * wp;
  return ll;
}

// Log posterior of the Bernoulli component fit on zero indicators z;
// P(z=1) = 1 - sigmoid(g^T w).
inline double bern_log_posterior(const Eigen::VectorXd& w, const Eigen::MatrixXd& G,
                                 const Eigen::VectorXd& z, double prior_scale,
                                 Eigen::VectorXd& grad) {
  double ll = 0.0;
  grad.setZero();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto g = G.row(i);
    const double s = sigmoid(g.dot(w));  // P(z=0)
    if (z(i) > 0.5) {
      ll += std::log(std::max(1.0 - s, 1e-300));
      grad += g.transpose() * (-s);
    } else {
      ll += std::log(std::max(s, 1e-300));
      grad += g.transpose() * (1.0 - s);
    }
  }
  const double inv_var = 1.0 / (prior_scale * prior_scale);
  ll += -0.5 * inv_var * w.squaredNorm();
  grad -= inv_var * w;
  return ll;
}

// Log posterior of the transformed non-zero component with unit noise
// variance; equivalent to ridge regression.
inline double normal_log_posterior(const Eigen::VectorXd& w, const Eigen::MatrixXd& G,
                                   const Eigen::VectorXd& y, double prior_scale,
                                   Eigen::VectorXd& grad) {
  const Eigen::VectorXd resid = y - G * w;
  const double inv_var = 1.0 / (prior_scale * prior_scale);
  grad = G.transpose() * resid - inv_var * w;
  return -0.5 * resid.squaredNorm() - 0.5 * inv_var * w.squaredNorm();
}

template <typename Objective>
AscentResult multistart(const Objective& objective, Eigen::Index dim, const FitConfig& cfg,
                        Rng& rng) {
  std::normal_distribution<double> init(0.0, 1.0);
  AscentResult best;
  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::VectorXd w0(dim);
    for (Eigen::Index j = 0; j < dim; ++j) w0(j) = init(rng);
    if (r == 0) w0.setZero();  // always try the prior mode
    AscentResult res = maximize(objective, std::move(w0), cfg.max_iter, cfg.grad_tol);
    if (res.value > best.value) best = std::move(res);
  }
  if (!std::isfinite(best.value))
    throw FitError("all restarts diverged (non-finite log posterior)");
  return best;
}

}  // namespace detail

// Design matrix and responses for one user, under fitting-mode day
// normalization.
struct UserDesign {
  Eigen::MatrixXd G;
  Eigen::VectorXi D;
};

inline UserDesign build_user_design(const UserSessions& user, BaseVariant variant,
                                    int weekday_offset = 0) {
  const int T = user.num_decisions();
  UserDesign d;
  d.G.resize(T, env_baseline_dim(variant));
  d.D.resize(T);
  for (int t = 1; t <= T; ++t) {
    std::span<const int> hist(user.durations.data(), static_cast<std::size_t>(t - 1));
    d.G.row(t - 1) =
        env_baseline_features(hist, t, variant, DayNorm::Fitting, weekday_offset);
    d.D(t - 1) = user.durations[t - 1];
  }
  return d;
}

// Selection loss: root of the *sum* (not the mean) of squared errors of the
// marginal mean against observed durations.
inline double rmse(const UserDesign& data, const UserEnvModel& model) {
  double ss = 0.0;
  for (Eigen::Index i = 0; i < data.D.size(); ++i) {
    const Eigen::VectorXd g = data.G.row(i);
    const double e = data.D(i) - marginal_mean(model, g);
    ss += e * e;
  }
  return std::sqrt(ss);
}

inline FitResult fit_user_model(const UserSessions& user, ModelClass cls,
                                BaseVariant variant, const FitConfig& cfg,
                                int weekday_offset = 0) {
  if (user.num_decisions() == 0) throw FitError("empty user data: " + user.user_id);
  const UserDesign data = build_user_design(user, variant, weekday_offset);
  const Eigen::Index k = data.G.cols();
  Rng rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(cls),
                                   static_cast<std::uint64_t>(variant),
                                   std::hash<std::string>{}(user.user_id)});

  FitResult out;
  out.model.user_id = user.user_id;
  out.model.cls = cls;
  out.model.variant = variant;
  out.restarts_used = cfg.restarts;

  if (cls == ModelClass::Zip) {
    auto obj = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
      return detail::zip_log_posterior(w, data.G, data.D, cfg.prior_scale, grad);
    };
    auto best = detail::multistart(obj, 2 * k, cfg, rng);
    out.model.bern_w = best.w.head(k);
    out.model.nonzero_w = best.w.tail(k);
    out.log_posterior = best.value;
    out.converged = best.converged;
  } else {
    Eigen::VectorXd z(data.D.size());
    std::vector<Eigen::Index> nz_rows;
    for (Eigen::Index i = 0; i < data.D.size(); ++i) {
      z(i) = data.D(i) > 0 ? 1.0 : 0.0;
      if (data.D(i) > 0) nz_rows.push_back(i);
    }
    auto bern_obj = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
      return detail::bern_log_posterior(w, data.G, z, cfg.prior_scale, grad);
    };
    auto bern_best = detail::multistart(bern_obj, k, cfg, rng);
    out.model.bern_w = bern_best.w;

    Eigen::MatrixXd Gnz(nz_rows.size(), k);
    Eigen::VectorXd y(nz_rows.size());
    for (std::size_t j = 0; j < nz_rows.size(); ++j) {
      Gnz.row(j) = data.G.row(nz_rows[j]);
      const double d = data.D(nz_rows[j]);
      y(j) = cls == ModelClass::HurdleSqrt ? std::sqrt(d) : std::log(d);
    }
    double nz_value = 0.0;
    bool nz_converged = true;
    if (nz_rows.empty()) {
      // Degenerate all-zero user: non-zero component stays at the prior mode.
      out.model.nonzero_w = Eigen::VectorXd::Zero(k);
      out.model.sigma_u = 1e-3;
    } else {
      auto nz_obj = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
        return detail::normal_log_posterior(w, Gnz, y, cfg.prior_scale, grad);
      };
      auto nz_best = detail::multistart(nz_obj, k, cfg, rng);
      out.model.nonzero_w = nz_best.w;
      nz_value = nz_best.value;
      nz_converged = nz_best.converged;
      const Eigen::VectorXd resid = y - Gnz * nz_best.w;
      out.model.sigma_u =
          std::max(std::sqrt(resid.squaredNorm() / static_cast<double>(y.size())), 1e-3);
    }
    out.log_posterior = bern_best.value + nz_value;
    out.converged = bern_best.converged && nz_converged;
  }
  out.rmse = rmse(data, out.model);
  return out;
}

struct ModelSelection {
  ModelClass chosen = ModelClass::Zip;
  FitResult zip, hurdle_sqrt, hurdle_log;

  const FitResult& best() const {
    switch (chosen) {
      case ModelClass::Zip: return zip;
      case ModelClass::HurdleSqrt: return hurdle_sqrt;
      case ModelClass::HurdleLog: return hurdle_log;
    }
    return zip;
  }
};

// Fits all three classes and keeps the lowest-RMSE one. Ties break in the
// order ZIP < HurdleSqrt < HurdleLog.
inline ModelSelection select_model_class(const UserSessions& user, BaseVariant variant,
                                         const FitConfig& cfg, int weekday_offset = 0) {
  ModelSelection sel;
  sel.zip = fit_user_model(user, ModelClass::Zip, variant, cfg, weekday_offset);
  sel.hurdle_sqrt = fit_user_model(user, ModelClass::HurdleSqrt, variant, cfg, weekday_offset);
  sel.hurdle_log = fit_user_model(user, ModelClass::HurdleLog, variant, cfg, weekday_offset);
  sel.chosen = ModelClass::Zip;
  double best = sel.zip.rmse;
  if (sel.hurdle_sqrt.rmse < best) {
    best = sel.hurdle_sqrt.rmse;
    sel.chosen = ModelClass::HurdleSqrt;
  }
  if (sel.hurdle_log.rmse < best) {
    sel.chosen = ModelClass::HurdleLog;
  }
  return sel;
}

}  // namespace brushsim
