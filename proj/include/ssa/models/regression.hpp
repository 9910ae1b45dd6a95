#pragma once

#include <Eigen/Dense>

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
 * @file regression.hpp
 *
 * Linear model t = theta_0 + theta_1 x1 + ... + theta_4 x4 + eps where the
 * covariate x2 is missing not at random:
 *
 *   logit P(R = 1 | t, x) = h(t, x1, x3, x4) + eta x2.
 *
 * Among complete cases x2 | t, x1, x3, x4 is modelled as N(gamma' z, tau2); for
 * the incomplete cases that normal is tilted by exp(-eta x2), which shifts its
 * mean by -eta tau2.
 */

namespace ssa::regression {

struct RegressionDataset {
  Eigen::VectorXd t;
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;  // entries where `missing` is set are ignored
  Eigen::VectorXd x3;
  Eigen::VectorXd x4;
  std::vector<bool> missing;

  Eigen::Index rows() const noexcept { return t.size(); }
  std::size_t complete_cases() const {
    std::size_t c = 0;
    for (bool m : missing) c += m ? 0 : 1;
    return c;
  }
};

inline void validate(const RegressionDataset& d) {
  const Eigen::Index n = d.rows();
  require(n >= 1, ErrorKind::invalid_data, "regression dataset is empty");
  require(d.x1.size() == n && d.x2.size() == n && d.x3.size() == n && d.x4.size() == n &&
              d.missing.size() == static_cast<std::size_t>(n),
          ErrorKind::invalid_data, "regression columns differ in length");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string row = "row " + std::to_string(i + 1);
    require(std::isfinite(d.t(i)) && std::isfinite(d.x1(i)) && std::isfinite(d.x3(i)) && std::isfinite(d.x4(i)),
            ErrorKind::invalid_data, row + ": t, x1, x3 and x4 must be observed and finite");
    require(d.missing[static_cast<std::size_t>(i)] || std::isfinite(d.x2(i)), ErrorKind::invalid_data,
            row + ": observed x2 is not finite");
  }
}

/// Columns (1, x1, x2, x3, x4) with x2 taken from `x2`.
inline Eigen::MatrixXd outcome_design(const RegressionDataset& d, const Eigen::VectorXd& x2) {
  Eigen::MatrixXd x(d.rows(), 5);
  x.col(0).setOnes();
  x.col(1) = d.x1;
  x.col(2) = x2;
  x.col(3) = d.x3;
  x.col(4) = d.x4;
  return x;
}

struct CovariateFit {
  Eigen::VectorXd gamma;  // on (1, t, x1, x3, x4)
  double tau2 = 0.0;
  std::size_t n = 0;

  double mean(const RegressionDataset& d, Eigen::Index i) const {
    return gamma(0) + gamma(1) * d.t(i) + gamma(2) * d.x1(i) + gamma(3) * d.x3(i) + gamma(4) * d.x4(i);
  }
};

inline constexpr std::size_t kMinCompleteCases = 10;

/// OLS of x2 on (1, t, x1, x3, x4) over complete cases; tau2 has denominator n - 5.
inline CovariateFit fit_conditional_covariate(const RegressionDataset& d) {
  validate(d);
  const std::size_t cc = d.complete_cases();
  if (cc < kMinCompleteCases) {
    fail(ErrorKind::insufficient_data,
         std::to_string(cc) + " complete cases; at least 10 are needed to model x2");
  }
  Eigen::MatrixXd z(static_cast<Eigen::Index>(cc), 5);
  Eigen::VectorXd y(static_cast<Eigen::Index>(cc));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d.missing[static_cast<std::size_t>(i)]) continue;
    z.row(r) << 1.0, d.t(i), d.x1(i), d.x3(i), d.x4(i);
    y(r) = d.x2(i);
    ++r;
  }
  const auto fit = ols(z, y);
  const double scale = y.squaredNorm() / static_cast<double>(cc);
  if (!(fit.sigma2 > 1e-24 * std::max(scale, 1.0))) {
    fail(ErrorKind::numerically_degenerate, "x2 is an exact linear function of (t, x1, x3, x4); tau2 = 0");
  }
  return {fit.coef, fit.sigma2, cc};
}

/// Draws every missing x2 from N(m_i - eta tau2, tau2); observed values are kept.
inline Eigen::VectorXd impute_covariate(const RegressionDataset& d, const CovariateFit& fit, double eta, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(fit.tau2);
  Eigen::VectorXd x2 = d.x2;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (!d.missing[static_cast<std::size_t>(i)]) continue;
    x2(i) = fit.mean(d, i) - eta * fit.tau2 + sd * normal(rng);
  }
  return x2;
}

struct RegressionFit {
  Eigen::VectorXd theta;     // (theta_0 .. theta_4)
  Eigen::VectorXd theta_se;  // model standard errors
  double sigma2 = 0.0;
  CovariateFit covariate;
};

/// OLS on complete rows only; valid when nothing is missing or for complete-case analysis.
inline RegressionFit fit_complete_cases(const RegressionDataset& d) {
  validate(d);
  const std::size_t cc = d.complete_cases();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cc), 5);
  Eigen::VectorXd t(static_cast<Eigen::Index>(cc));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d.missing[static_cast<std::size_t>(i)]) continue;
    x.row(r) << 1.0, d.x1(i), d.x2(i), d.x3(i), d.x4(i);
    t(r) = d.t(i);
    ++r;
  }
  const auto fit = ols(x, t);
  RegressionFit out;
  out.theta = fit.coef;
  out.theta_se = fit.standard_errors();
  out.sigma2 = fit.sigma2;
  return out;
}

inline constexpr int kFitImputations = 20;

/*
 * Estimate at eta: average of OLS fits over kFitImputations completed
 * datasets. The imputation stream depends only on eta, so the fit is a
 * deterministic function of (data, eta). Standard errors combine within- and
 * between-imputation variance.
 */
inline RegressionFit fit_regression(const RegressionDataset& d, double eta, int imputations = kFitImputations) {
  require(imputations >= 2, ErrorKind::invalid_argument, "need at least two imputations");
  RegressionFit out;
  out.covariate = fit_conditional_covariate(d);
  Rng rng = make_stream(kTagFit, {hash_values(std::span<const double>(&eta, 1))});
  Eigen::MatrixXd thetas(5, imputations);
  Eigen::VectorXd within = Eigen::VectorXd::Zero(5);
  double sigma2 = 0.0;
  for (int m = 0; m < imputations; ++m) {
    const auto x2 = impute_covariate(d, out.covariate, eta, rng);
    const auto fit = ols(outcome_design(d, x2), d.t);
    thetas.col(m) = fit.coef;
    within += fit.standard_errors().array().square().matrix();
    sigma2 += fit.sigma2;
  }
  const double mi = static_cast<double>(imputations);
  out.theta = thetas.rowwise().mean();
  const Eigen::MatrixXd centred = thetas.colwise() - out.theta;
  const Eigen::VectorXd between = centred.rowwise().squaredNorm() / (mi - 1.0);
  out.theta_se = (within / mi + (1.0 + 1.0 / mi) * between).array().sqrt().matrix();
  out.sigma2 = sigma2 / mi;
  return out;
}

/*
 * One residual-bootstrap replicate: impute x2 at eta, refit the outcome model
 * on the completed data, then draw t* ~ N(theta' x*, sigma2) for every row.
 */
inline RegressionDataset simulate_regression_replicate(const RegressionDataset& d, const CovariateFit& cov,
                                                       double eta, Rng& rng) {
  RegressionDataset out = d;
  const auto x2 = impute_covariate(d, cov, eta, rng);
  const auto design = outcome_design(d, x2);
  const auto fit = ols(design, d.t);
  std::normal_distribution<double> normal(0.0, std::sqrt(fit.sigma2));
  out.t = design * fit.coef;
  for (Eigen::Index i = 0; i < out.t.size(); ++i) out.t(i) += normal(rng);
  return out;
}

/// Points (t, x1, x3, x4) over all rows; x2 is left out because it is not always observed.
inline PointCloud regression_view(const RegressionDataset& d) {
  std::vector<double> coords;
  coords.reserve(static_cast<std::size_t>(4 * d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    coords.insert(coords.end(), {d.t(i), d.x1(i), d.x3(i), d.x4(i)});
  }
  return PointCloud(4, std::move(coords));
}

inline PointCloud simulate_observed_regression(const RegressionDataset& d, double eta, Rng& rng) {
  return regression_view(simulate_regression_replicate(d, fit_conditional_covariate(d), eta, rng));
}

class RegressionModel {
 public:
  using data_type = RegressionDataset;

  struct fit_type {
    RegressionFit estimate;
    RegressionDataset data;
    double eta = 0.0;
  };

  fit_type fit(const SensitivityPoint& eta, const data_type& data) const {
    require(eta.values.size() == 1, ErrorKind::invalid_argument, "regression model takes a scalar eta");
    return {fit_regression(data, eta[0]), data, eta[0]};
  }

  data_type simulate_observed(const fit_type& f, const SensitivityPoint&, Rng& rng) const {
    return simulate_regression_replicate(f.data, f.estimate.covariate, f.eta, rng);
  }

  PointCloud comparison_view(const data_type& data) const { return regression_view(data); }

  FitResult summarize(const fit_type& f) const {
    FitResult r;
    for (Eigen::Index j = 0; j < 5; ++j) r.estimates.push_back({"theta_" + std::to_string(j), f.estimate.theta(j)});
    for (Eigen::Index j = 0; j < 5; ++j) {
      r.nuisance.push_back({"se_theta_" + std::to_string(j), f.estimate.theta_se(j)});
    }
    r.nuisance.push_back({"sigma2", f.estimate.sigma2});
    r.nuisance.push_back({"tau2", f.estimate.covariate.tau2});
    return r;
  }
};

static_assert(SensitivityModel<RegressionModel>);

/// P(R = 0) = 1 - expit(1 + (x1 - mean x1) - 0.5 (x2 - mean x2)).
inline double missing_probability(double x1, double x2, double x1_bar, double x2_bar) {
  return 1.0 - expit(1.0 + (x1 - x1_bar) - 0.5 * (x2 - x2_bar));
}

/// Independent Bernoulli missingness of x2 using the sample means of x1 and x2.
inline std::vector<bool> mnar_mask_generator(const RegressionDataset& d, Rng& rng) {
  validate(d);
  for (bool m : d.missing) require(!m, ErrorKind::invalid_argument, "mask generator needs a fully observed x2");
  const double x1_bar = d.x1.mean();
  const double x2_bar = d.x2.mean();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<bool> mask(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    mask[static_cast<std::size_t>(i)] = unif(rng) < missing_probability(d.x1(i), d.x2(i), x1_bar, x2_bar);
  }
  return mask;
}

/*
 * Fully observed data shaped like the 2001 highway fuel table: 51 rows,
 * independent normal covariates with that table's means and SDs, and
 * t = theta' x + N(0, sigma^2) at its complete-data fit.
 */
struct FuelLikeGenerator {
  std::size_t n = 51;
  std::vector<double> covariate_mean{15.74, 28.40, 903.7, 20.16};
  std::vector<double> covariate_sd{1.49, 4.45, 72.9, 4.54};
  std::vector<double> theta{154.19, 18.55, -6.14, 0.47, -4.23};
  double sigma = 64.89;
};

inline RegressionDataset generate_fuel_like(const FuelLikeGenerator& g, Rng& rng) {
  require(g.covariate_mean.size() == 4 && g.covariate_sd.size() == 4 && g.theta.size() == 5,
          ErrorKind::invalid_argument, "fuel generator needs 4 covariates and 5 coefficients");
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(g.n);
  RegressionDataset d;
  Eigen::VectorXd* cols[4] = {&d.x1, &d.x2, &d.x3, &d.x4};
  for (auto* c : cols) c->resize(n);
  d.t.resize(n);
  d.missing.assign(g.n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    double t = g.theta[0];
    for (std::size_t j = 0; j < 4; ++j) {
      const double v = g.covariate_mean[j] + g.covariate_sd[j] * normal(rng);
      (*cols[j])(i) = v;
      t += g.theta[j + 1] * v;
    }
    d.t(i) = t + g.sigma * normal(rng);
  }
  return d;
}

struct RegressionStudyConfig {
  FuelLikeGenerator generator{};
  std::vector<double> eta_grid = SensitivityGrid::linspace(-5.0, 5.0, 51);
  int replications = 100;
};

struct RegressionStudyRow {
  int replication = 0;
  std::size_t n_missing = 0;
  bool has_plausible = false;
  double selected_eta = 0.0;
  Eigen::VectorXd theta_complete;
  Eigen::VectorXd theta_ssa;
  Eigen::VectorXd se_ssa;
};

struct RegressionStudyReport {
  std::vector<RegressionStudyRow> rows;
  int with_plausible = 0;
  Eigen::VectorXd avg_theta_complete;
  Eigen::VectorXd avg_theta_ssa;
  Eigen::VectorXd sd_theta_ssa;      // across replications
  Eigen::VectorXd avg_model_se_ssa;  // model standard errors averaged over replications
  double avg_selected_eta = 0.0;
};

/// Replicated fuel-like study: complete data, MNAR mask on x2, sweep, most plausible theta.
inline RegressionStudyReport run_regression_study(const RegressionStudyConfig& cfg, const SsaConfig& ssa_cfg) {
  require(cfg.replications >= 1, ErrorKind::invalid_argument, "replications must be positive");
  std::vector<SensitivityPoint> points;
  for (double e : cfg.eta_grid) points.push_back({{e}});
  const SensitivityGrid grid({"eta"}, std::move(points));
  const RegressionModel model;

  RegressionStudyReport report;
  report.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(report.rows.size(), ssa_cfg.workers, [&](std::size_t rep) {
    Rng rng = make_stream(ssa_cfg.seed, {kTagStudy, rep});
    auto data = generate_fuel_like(cfg.generator, rng);
    RegressionStudyRow row;
    row.replication = static_cast<int>(rep);
    row.theta_complete = fit_complete_cases(data).theta;
    data.missing = mnar_mask_generator(data, rng);
    for (bool m : data.missing) row.n_missing += m ? 1 : 0;

    SsaConfig inner = ssa_cfg;
    inner.workers = 1;
    inner.seed = derive_seed(ssa_cfg.seed, {kTagStudy, rep, 1});
    try {
      const auto cells = run_sweep(model, data, grid, inner);
      const auto best = most_plausible(cells);
      row.has_plausible = true;
      row.selected_eta = best.eta[0];
      row.theta_ssa.resize(5);
      row.se_ssa.resize(5);
      for (Eigen::Index j = 0; j < 5; ++j) {
        row.theta_ssa(j) = best.fit.estimates[static_cast<std::size_t>(j)].value;
        row.se_ssa(j) = best.fit.nuisance[static_cast<std::size_t>(j)].value;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::no_plausible_model && e.kind() != ErrorKind::fit_failure &&
          e.kind() != ErrorKind::insufficient_data) {
        throw;
      }
    }
    report.rows[rep] = std::move(row);
  });

  report.avg_theta_complete = Eigen::VectorXd::Zero(5);
  report.avg_theta_ssa = Eigen::VectorXd::Zero(5);
  report.sd_theta_ssa = Eigen::VectorXd::Zero(5);
  report.avg_model_se_ssa = Eigen::VectorXd::Zero(5);
  for (const auto& row : report.rows) report.avg_theta_complete += row.theta_complete;
  report.avg_theta_complete /= static_cast<double>(report.rows.size());
  int ok = 0;
  for (const auto& row : report.rows) {
    if (!row.has_plausible) continue;
    ++ok;
    report.avg_theta_ssa += row.theta_ssa;
    report.avg_model_se_ssa += row.se_ssa;
    report.avg_selected_eta += row.selected_eta;
  }
  report.with_plausible = ok;
  if (ok > 0) {
    report.avg_theta_ssa /= ok;
    report.avg_model_se_ssa /= ok;
    report.avg_selected_eta /= ok;
    for (const auto& row : report.rows) {
      if (row.has_plausible) report.sd_theta_ssa += (row.theta_ssa - report.avg_theta_ssa).array().square().matrix();
    }
    if (ok > 1) report.sd_theta_ssa = (report.sd_theta_ssa / (ok - 1)).array().sqrt().matrix();
  }
  return report;
}

}  // namespace ssa::regression
