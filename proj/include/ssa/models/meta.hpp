#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/nelder_mead.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/core/stats.hpp"
#include "ssa/engine.hpp"
#include "ssa/knn.hpp"
#include "ssa/types.hpp"

/**
 * @file meta.hpp
 *
 * Copas selection model for publication bias in random-effects meta-analysis.
 *
 *   y_i = mu_i + s_i eps_i,   mu_i ~ N(mu, tau2),   eps_i ~ N(0, 1)
 *   z_i = a + b / s_i + delta_i,   delta_i ~ N(0, 1),   corr(eps_i, delta_i) = rho
 *
 * Study i is published iff z_i > 0. (a, b) are the sensitivity parameters;
 * (mu, tau2, rho) are estimated by maximising the likelihood of the published
 * studies.
 */

namespace ssa::meta {

struct Study {
  double y = 0.0;  // effect estimate (log-odds scale)
  double s = 1.0;  // its standard error
};

struct MetaDataset {
  std::vector<Study> studies;
};

struct MetaFit {
  double mu = 0.0;
  double tau2 = 0.0;
  double rho = 0.0;
  double loglik = 0.0;
  bool converged = false;
  int evaluations = 0;
};

inline void validate(const MetaDataset& data) {
  require(data.studies.size() >= 2, ErrorKind::invalid_data, "meta-analysis needs at least two studies");
  for (std::size_t i = 0; i < data.studies.size(); ++i) {
    const auto& st = data.studies[i];
    require(std::isfinite(st.y) && std::isfinite(st.s), ErrorKind::invalid_data,
            "study " + std::to_string(i + 1) + " has a non-finite value");
    require(st.s > 0.0, ErrorKind::invalid_data,
            "study " + std::to_string(i + 1) + " has a non-positive standard error");
  }
}

/// Random-effects log-likelihood without the -log(2 pi)/2 constants.
inline double random_effects_loglik(const MetaDataset& data, double mu, double tau2) {
  double total = 0.0;
  for (const auto& st : data.studies) {
    const double var = tau2 + st.s * st.s;
    total += -0.5 * std::log(var) - (st.y - mu) * (st.y - mu) / (2.0 * var);
  }
  return total;
}

/*
 * Log-likelihood of the published studies given (a, b), constants dropped:
 *   sum_i -log(tau2 + s_i^2)/2 - (y_i - mu)^2 / (2 (tau2 + s_i^2))
 *         - log Phi(a + b/s_i) + log Phi(v_i),
 *   v_i = (a + b/s_i + rho_i (y_i - mu) / sqrt(tau2 + s_i^2)) / sqrt(1 - rho_i^2),
 *   rho_i = rho s_i / sqrt(tau2 + s_i^2).
 * Returns -inf when the selection correlation degenerates to +-1.
 */
inline double copas_loglik(const MetaDataset& data, double mu, double tau2, double rho, double a, double b) {
  require(tau2 >= 0.0, ErrorKind::invalid_argument, "tau2 must be nonnegative");
  require(std::abs(rho) <= 1.0, ErrorKind::invalid_argument, "rho must lie in [-1, 1]");
  double total = 0.0;
  for (const auto& st : data.studies) {
    const double var = tau2 + st.s * st.s;
    const double sd = std::sqrt(var);
    const double u = a + b / st.s;
    const double rho_i = st.s * rho / sd;
    const double slack = 1.0 - rho_i * rho_i;
    if (!(slack > 0.0)) return -HUGE_VAL;
    const double v = (u + rho_i * (st.y - mu) / sd) / std::sqrt(slack);
    total += -0.5 * std::log(var) - (st.y - mu) * (st.y - mu) / (2.0 * var) - log_normal_cdf(u) +
             log_normal_cdf(v);
  }
  return total;
}

/// Inverse-variance weighted mean and DerSimonian-Laird tau2, used as start values.
inline std::pair<double, double> moment_estimates(const MetaDataset& data) {
  double sw = 0.0;
  double swy = 0.0;
  double sw2 = 0.0;
  for (const auto& st : data.studies) {
    const double w = 1.0 / (st.s * st.s);
    sw += w;
    swy += w * st.y;
    sw2 += w * w;
  }
  const double mu = swy / sw;
  double q = 0.0;
  for (const auto& st : data.studies) q += (st.y - mu) * (st.y - mu) / (st.s * st.s);
  const double df = static_cast<double>(data.studies.size() - 1);
  const double tau2 = std::max(0.0, (q - df) / (sw - sw2 / sw));
  return {mu, tau2};
}

inline constexpr double kTransformBound = 20.0;

/*
 * Maximum likelihood for (mu, tau2, rho) at fixed (a, b). The simplex works on
 * (mu, log tau2, atanh rho), each confined to [-20, 20]; it is started from
 * five fixed points and the best result is polished by one restart. A best
 * point sitting on that box is reported as not converged.
 */
inline MetaFit fit_copas(const MetaDataset& data, double a, double b) {
  validate(data);
  require(std::isfinite(a) && std::isfinite(b), ErrorKind::invalid_argument, "a and b must be finite");

  auto objective = [&](const std::vector<double>& t) {
    double penalty = 0.0;
    std::array<double, 3> c{};
    for (std::size_t j = 0; j < 3; ++j) {
      c[j] = std::clamp(t[j], -kTransformBound, kTransformBound);
      penalty += (t[j] - c[j]) * (t[j] - c[j]);
    }
    const double ll = copas_loglik(data, c[0], std::exp(c[1]), std::tanh(c[2]), a, b);
    return -ll + 1e3 * penalty;
  };

  const auto [mu0, tau0] = moment_estimates(data);
  const double log_tau0 = std::log(std::max(tau0, 1e-4));
  double mean_y = 0.0;
  for (const auto& st : data.studies) mean_y += st.y;
  mean_y /= static_cast<double>(data.studies.size());
  const std::array<std::vector<double>, 5> starts{{
      {mu0, log_tau0, 0.0},
      {mu0, log_tau0, std::atanh(0.5)},
      {mu0, log_tau0, std::atanh(-0.5)},
      {mu0, std::log(1e-3), std::atanh(0.9)},
      {mean_y, log_tau0 + 1.0, 0.0},
  }};

  NelderMeadResult best;
  best.value = HUGE_VAL;
  int evaluations = 0;
  for (const auto& start : starts) {
    auto r = nelder_mead(objective, start);
    evaluations += r.evaluations;
    if (r.value < best.value) best = std::move(r);
  }
  if (!(best.value < HUGE_VAL)) {
    fail(ErrorKind::fit_failure, "Copas fit failed from every start at (a, b) = (" + std::to_string(a) +
                                     ", " + std::to_string(b) + ")");
  }
  NelderMeadOptions polish;
  polish.initial_step = 0.05;
  auto refined = nelder_mead(objective, best.x, polish);
  evaluations += refined.evaluations;
  if (refined.value <= best.value) best = std::move(refined);

  MetaFit fit;
  std::array<double, 3> c{};
  bool on_bound = false;
  for (std::size_t j = 0; j < 3; ++j) {
    c[j] = std::clamp(best.x[j], -kTransformBound, kTransformBound);
    on_bound = on_bound || std::abs(c[j]) >= kTransformBound - 1e-6;
  }
  fit.mu = c[0];
  fit.tau2 = std::exp(c[1]);
  fit.rho = std::tanh(c[2]);
  fit.loglik = copas_loglik(data, fit.mu, fit.tau2, fit.rho, a, b);
  fit.converged = best.converged && !on_bound;
  fit.evaluations = evaluations;
  return fit;
}

struct SelectionDraw {
  MetaDataset kept;
  std::size_t candidates = 0;
};

/// Expected fraction of candidates that survive selection, E over s_pool of Phi(a + b/s).
inline double acceptance_probability(double a, double b, const std::vector<double>& s_pool) {
  double total = 0.0;
  for (double s : s_pool) total += normal_cdf(a + b / s);
  return total / static_cast<double>(s_pool.size());
}

/*
 * Draws candidate studies from the fitted model until n_target are published.
 * Each candidate takes s from the empirical distribution of s_pool, then
 * y = mu + tau u + s eps and z = a + b/s + delta with corr(eps, delta) = rho.
 */
inline SelectionDraw simulate_selected_detailed(const MetaFit& fit, double a, double b,
                                                const std::vector<double>& s_pool, std::size_t n_target,
                                                Rng& rng) {
  require(!s_pool.empty(), ErrorKind::invalid_argument, "s_pool is empty");
  require(n_target >= 1, ErrorKind::invalid_argument, "n_target must be positive");
  require(fit.tau2 >= 0.0 && std::abs(fit.rho) <= 1.0, ErrorKind::invalid_argument, "invalid fitted parameters");
  const double accept = acceptance_probability(a, b, s_pool);
  if (accept < 1e-4) {
    fail(ErrorKind::simulation_infeasible, "selection probability " + std::to_string(accept) +
                                               " is below 1e-4 at (a, b) = (" + std::to_string(a) + ", " +
                                               std::to_string(b) + ")");
  }

  std::uniform_int_distribution<std::size_t> pick(0, s_pool.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double tau = std::sqrt(fit.tau2);
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - fit.rho * fit.rho));
  const auto max_candidates = static_cast<std::size_t>(100.0 * static_cast<double>(n_target) / accept) + 1000;

  SelectionDraw out;
  out.kept.studies.reserve(n_target);
  while (out.kept.studies.size() < n_target) {
    if (out.candidates >= max_candidates) {
      fail(ErrorKind::simulation_infeasible, "selection simulation exceeded its candidate budget");
    }
    ++out.candidates;
    const double s = s_pool[pick(rng)];
    const double u = normal(rng);
    const double eps = normal(rng);
    const double xi = normal(rng);
    const double delta = fit.rho * eps + rho_c * xi;
    const double y = fit.mu + tau * u + s * eps;
    if (a + b / s + delta > 0.0) out.kept.studies.push_back({y, s});
  }
  return out;
}

inline MetaDataset simulate_selected(const MetaFit& fit, double a, double b, const std::vector<double>& s_pool,
                                     std::size_t n_target, Rng& rng) {
  return simulate_selected_detailed(fit, a, b, s_pool, n_target, rng).kept;
}

/// Funnel-plot geometry: points (y, 1/s).
inline PointCloud funnel_view(const MetaDataset& data) {
  std::vector<double> coords;
  coords.reserve(2 * data.studies.size());
  for (const auto& st : data.studies) {
    coords.push_back(st.y);
    coords.push_back(1.0 / st.s);
  }
  return PointCloud(2, std::move(coords));
}

/// Sensitivity model over eta = (a, b).
class CopasModel {
 public:
  using data_type = MetaDataset;

  struct fit_type {
    MetaFit estimate;
    double a = 0.0;
    double b = 0.0;
    std::vector<double> s_pool;
    std::size_t n_target = 0;
  };

  fit_type fit(const SensitivityPoint& eta, const data_type& data) const {
    require(eta.values.size() == 2, ErrorKind::invalid_argument, "Copas model takes eta = (a, b)");
    fit_type f;
    f.a = eta[0];
    f.b = eta[1];
    f.estimate = fit_copas(data, f.a, f.b);
    f.s_pool.reserve(data.studies.size());
    for (const auto& st : data.studies) f.s_pool.push_back(st.s);
    f.n_target = data.studies.size();
    return f;
  }

  data_type simulate_observed(const fit_type& f, const SensitivityPoint&, Rng& rng) const {
    return simulate_selected(f.estimate, f.a, f.b, f.s_pool, f.n_target, rng);
  }

  PointCloud comparison_view(const data_type& data) const { return funnel_view(data); }

  FitResult summarize(const fit_type& f) const {
    FitResult r;
    r.estimates = {{"mu", f.estimate.mu}};
    r.nuisance = {{"tau2", f.estimate.tau2}, {"rho", f.estimate.rho}};
    r.loglik = f.estimate.loglik;
    r.converged = f.estimate.converged;
    r.iterations = f.estimate.evaluations;
    if (!r.converged) r.diagnostic = "optimum on the parameter box or simplex not converged";
    return r;
  }
};

static_assert(SensitivityModel<CopasModel>);

}  // namespace ssa::meta
