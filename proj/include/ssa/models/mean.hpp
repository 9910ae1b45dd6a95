#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/parallel.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/core/stats.hpp"
#include "ssa/engine.hpp"
#include "ssa/knn.hpp"
#include "ssa/types.hpp"

/**
 * @file mean.hpp
 *
 * Mean of a variable X whose missingness follows a logistic model in X
 * itself, P(R = 1 | x) = expit(eta (x + lambda)), with lambda known.
 *
 * The missing-data density is the observed-data density tilted by the odds of
 * missingness, f(x | R=0) proportional to f(x | R=1) exp(-eta (x + lambda)).
 * The observed-data density is realised by the empirical distribution of the
 * observed values, so the tilt becomes a reweighting of those values.
 */

namespace ssa::mean {

struct UnivariateIncomplete {
  std::vector<double> x_obs;
  std::size_t n_missing = 0;
  double lambda = 0.0;
};

struct MeanFit {
  double mu_hat = 0.0;   // estimate of E(X)
  double mu1 = 0.0;      // observed-data mean
  double mu2_hat = 0.0;  // estimated mean of the missing part
  double pi_hat = 1.0;   // observed fraction
};

inline void validate(const UnivariateIncomplete& data) {
  require(!data.x_obs.empty(), ErrorKind::invalid_data, "no observed values");
  for (double x : data.x_obs) {
    require(std::isfinite(x), ErrorKind::invalid_data, "non-finite observed value");
  }
  require(std::isfinite(data.lambda), ErrorKind::invalid_argument, "lambda must be finite");
}

/// P(R = 1 | X = x).
inline double mdm_prob(double x, double eta, double lambda) { return expit(eta * (x + lambda)); }

/// Normalised weights proportional to exp(-eta (x_i + lambda)).
inline std::vector<double> tilt_weights(const UnivariateIncomplete& data, double eta) {
  validate(data);
  std::vector<double> w(data.x_obs.size());
  double top = -HUGE_VAL;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = -eta * (data.x_obs[i] + data.lambda);
    if (!std::isfinite(w[i])) {
      fail(ErrorKind::numerically_degenerate, "tilt exponent is not finite at eta = " + std::to_string(eta));
    }
    top = std::max(top, w[i]);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

/*
 * Mean of the missing part: the tilted weighted mean of the observed values,
 * sum x_i w_i / sum w_i with w_i = exp(-eta (x_i + lambda)). Weights are
 * shifted by their largest exponent before exponentiating, so they cannot all
 * underflow.
 */
inline double estimate_mu2(const UnivariateIncomplete& data, double eta) {
  validate(data);
  std::vector<double> e(data.x_obs.size());
  double top = -HUGE_VAL;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = -eta * (data.x_obs[i] + data.lambda);
    if (!std::isfinite(e[i])) {
      fail(ErrorKind::numerically_degenerate, "tilt exponent is not finite at eta = " + std::to_string(eta));
    }
    top = std::max(top, e[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double w = std::exp(e[i] - top);
    num += data.x_obs[i] * w;
    den += w;
  }
  return num / den;
}

inline MeanFit fit_mean(const UnivariateIncomplete& data, double eta) {
  validate(data);
  MeanFit fit;
  const auto n_obs = static_cast<double>(data.x_obs.size());
  double sum = 0.0;
  for (double x : data.x_obs) sum += x;
  fit.mu1 = sum / n_obs;
  fit.pi_hat = n_obs / (n_obs + static_cast<double>(data.n_missing));
  fit.mu2_hat = estimate_mu2(data, eta);
  fit.mu_hat = fit.mu1 + (1.0 - fit.pi_hat) * (fit.mu2_hat - fit.mu1);
  return fit;
}

/// Rule-of-thumb Gaussian kernel bandwidth for optional smoothing.
inline double silverman_bandwidth(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return 1.06 * std::sqrt(variance_of(x)) * std::pow(static_cast<double>(x.size()), -0.2);
}

/*
 * Draws n_missing values from the tilted observed-data distribution:
 * weighted resampling of x_obs, plus Gaussian kernel noise when bandwidth > 0.
 */
inline std::vector<double> impute_missing(const UnivariateIncomplete& data, double eta, Rng& rng,
                                          double bandwidth = 0.0) {
  const auto w = tilt_weights(data, eta);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(data.n_missing);
  for (double& v : out) {
    v = data.x_obs[pick(rng)];
    if (bandwidth > 0.0) v += bandwidth * noise(rng);
  }
  return out;
}

/*
 * How the missing values of a simulated complete dataset are drawn.
 *   tilted_normal:   N(m - eta v, v) with m, v the observed mean and variance,
 *                    i.e. the exact tilt of a normal fit to f(x | R = 1)
 *   tilted_resample: weighted resampling of x_obs with the tilt weights (default)
 *   tilted_smoothed: as tilted_resample plus Gaussian kernel noise
 */
enum class Imputation { tilted_normal, tilted_resample, tilted_smoothed };

/// Sensitivity model over the scalar eta of the logistic missingness model.
class MeanModel {
 public:
  using data_type = UnivariateIncomplete;

  struct fit_type {
    MeanFit estimate;
    double eta = 0.0;
    std::vector<double> weights;
    std::vector<double> x_obs;
    std::size_t n_missing = 0;
    double lambda = 0.0;
    double bandwidth = 0.0;
    double obs_mean = 0.0;
    double obs_var = 0.0;
  };

  explicit MeanModel(Imputation scheme = Imputation::tilted_resample) : scheme_(scheme) {}

  Imputation scheme() const noexcept { return scheme_; }

  fit_type fit(const SensitivityPoint& eta, const data_type& data) const {
    require(eta.values.size() == 1, ErrorKind::invalid_argument, "mean model takes a scalar eta");
    fit_type f;
    f.eta = eta[0];
    f.estimate = fit_mean(data, f.eta);
    f.weights = tilt_weights(data, f.eta);
    f.x_obs = data.x_obs;
    f.n_missing = data.n_missing;
    f.lambda = data.lambda;
    f.bandwidth = scheme_ == Imputation::tilted_smoothed ? silverman_bandwidth(data.x_obs) : 0.0;
    f.obs_mean = f.estimate.mu1;
    f.obs_var = data.x_obs.size() > 1 ? variance_of(data.x_obs) : 0.0;
    if (scheme_ == Imputation::tilted_normal) {
      require(f.obs_var > 0.0, ErrorKind::insufficient_data,
              "normal imputation needs two or more distinct observed values");
    }
    return f;
  }

  // Keep the observed values, add imputed ones, then re-apply the missingness model.
  data_type simulate_observed(const fit_type& f, const SensitivityPoint&, Rng& rng) const {
    std::discrete_distribution<std::size_t> pick(f.weights.begin(), f.weights.end());
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    data_type out;
    out.lambda = f.lambda;
    auto keep = [&](double x) {
      if (unif(rng) < mdm_prob(x, f.eta, f.lambda)) {
        out.x_obs.push_back(x);
      } else {
        ++out.n_missing;
      }
    };
    for (double x : f.x_obs) keep(x);
    const double tilted_mean = f.obs_mean - f.eta * f.obs_var;
    const double sd = std::sqrt(f.obs_var);
    for (std::size_t i = 0; i < f.n_missing; ++i) {
      double x = 0.0;
      if (scheme_ == Imputation::tilted_normal) {
        x = tilted_mean + sd * noise(rng);
      } else {
        x = f.x_obs[pick(rng)];
        if (f.bandwidth > 0.0) x += f.bandwidth * noise(rng);
      }
      keep(x);
    }
    return out;
  }

  PointCloud comparison_view(const data_type& data) const {
    require(!data.x_obs.empty(), ErrorKind::simulation_infeasible, "simulated dataset kept no values");
    return PointCloud::from_values(data.x_obs);
  }

  FitResult summarize(const fit_type& f) const {
    FitResult r;
    r.estimates = {{"mu", f.estimate.mu_hat}};
    r.nuisance = {{"mu_observed", f.estimate.mu1},
                  {"mu_missing", f.estimate.mu2_hat},
                  {"pi_observed", f.estimate.pi_hat}};
    return r;
  }

 private:
  Imputation scheme_ = Imputation::tilted_resample;
};

static_assert(SensitivityModel<MeanModel>);

/// Draws a complete normal sample and applies the logistic missingness model.
inline UnivariateIncomplete generate_incomplete(std::size_t n, double mu, double sigma2, double eta,
                                                double lambda, Rng& rng) {
  std::normal_distribution<double> normal(mu, std::sqrt(sigma2));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  UnivariateIncomplete data;
  data.lambda = lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    if (unif(rng) < mdm_prob(x, eta, lambda)) {
      data.x_obs.push_back(x);
    } else {
      ++data.n_missing;
    }
  }
  return data;
}

struct MeanStudyConfig {
  std::size_t n = 100;
  double mu = 0.0;
  double sigma2 = 1.0;
  double eta = -1.0;
  double lambda = 0.0;
  std::vector<double> eta_grid = SensitivityGrid::linspace(-5.0, 5.0, 101);
  int replications = 500;
  Imputation scheme = Imputation::tilted_resample;
};

struct MeanStudyRow {
  int replication = 0;
  std::size_t n_observed = 0;
  double complete_case_mean = 0.0;
  bool has_plausible = false;
  double selected_eta = 0.0;
  double mu_hat = 0.0;
  double range_lo = 0.0;
  double range_hi = 0.0;
  bool covered = false;
};

struct MeanStudyReport {
  std::vector<MeanStudyRow> rows;
  int with_plausible = 0;
  double avg_mu_hat = 0.0;
  double sd_mu_hat = 0.0;
  double avg_selected_eta = 0.0;
  double sd_selected_eta = 0.0;
  double coverage = 0.0;  // over all replications; no plausible set counts as a miss
  double avg_complete_case_mean = 0.0;
};

/*
 * Repeated simulation: each replication draws X ~ N(mu, sigma2) of size n,
 * applies the missingness model, runs the sweep and records the most
 * plausible eta and mu estimate. Coverage asks whether the true mu lies in
 * the range of mu estimates over the plausible set.
 */
inline MeanStudyReport run_mean_study(const MeanStudyConfig& cfg, const SsaConfig& ssa_cfg) {
  require(cfg.replications >= 1, ErrorKind::invalid_argument, "replications must be positive");
  require(cfg.sigma2 > 0.0, ErrorKind::invalid_argument, "sigma2 must be positive");
  std::vector<SensitivityPoint> points;
  for (double e : cfg.eta_grid) points.push_back({{e}});
  const SensitivityGrid grid({"eta"}, std::move(points));
  const MeanModel model(cfg.scheme);

  MeanStudyReport report;
  report.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(report.rows.size(), ssa_cfg.workers, [&](std::size_t rep) {
    Rng rng = make_stream(ssa_cfg.seed, {kTagStudy, rep});
    const auto data = generate_incomplete(cfg.n, cfg.mu, cfg.sigma2, cfg.eta, cfg.lambda, rng);
    MeanStudyRow row;
    row.replication = static_cast<int>(rep);
    row.n_observed = data.x_obs.size();
    row.complete_case_mean = mean_of(data.x_obs);

    SsaConfig inner = ssa_cfg;
    inner.workers = 1;
    inner.seed = derive_seed(ssa_cfg.seed, {kTagStudy, rep, 1});
    try {
      const auto cells = run_sweep(model, data, grid, inner);
      const auto best = most_plausible(cells);
      const auto ranges = estimate_ranges(plausible_set(cells, inner.alpha));
      row.has_plausible = true;
      row.selected_eta = best.eta[0];
      row.mu_hat = best.fit.primary();
      row.range_lo = ranges.front().lo;
      row.range_hi = ranges.front().hi;
      row.covered = row.range_lo <= cfg.mu && cfg.mu <= row.range_hi;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::no_plausible_model && e.kind() != ErrorKind::fit_failure) throw;
    }
    report.rows[rep] = row;
  });

  std::vector<double> mus;
  std::vector<double> etas;
  double cc = 0.0;
  int covered = 0;
  for (const auto& row : report.rows) {
    cc += row.complete_case_mean;
    if (!row.has_plausible) continue;
    mus.push_back(row.mu_hat);
    etas.push_back(row.selected_eta);
    if (row.covered) ++covered;
  }
  report.with_plausible = static_cast<int>(mus.size());
  report.avg_complete_case_mean = cc / static_cast<double>(report.rows.size());
  report.coverage = static_cast<double>(covered) / static_cast<double>(report.rows.size());
  if (!mus.empty()) {
    report.avg_mu_hat = mean_of(mus);
    report.avg_selected_eta = mean_of(etas);
    report.sd_mu_hat = mus.size() > 1 ? std::sqrt(variance_of(mus)) : 0.0;
    report.sd_selected_eta = etas.size() > 1 ? std::sqrt(variance_of(etas)) : 0.0;
  }
  return report;
}

}  // namespace ssa::mean
