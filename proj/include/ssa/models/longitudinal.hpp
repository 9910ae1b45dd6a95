#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/core/stats.hpp"
#include "ssa/engine.hpp"
#include "ssa/knn.hpp"
#include "ssa/types.hpp"

/**
 * @file longitudinal.hpp
 *
 * Monotone dropout in repeated measures. At visit k + 1 a subject still in
 * the study stays with probability
 *
 *   P(R_{k+1} = 1 | history, Y_{k+1}) = expit(b0 + b1 Y_k + eta_{k+1} Y_{k+1}),
 *
 * so eta_{k+1} = 0 is MAR. Given eta, the density of a missing Y_{k+1} is the
 * observed-data conditional tilted by exp(-eta Y_{k+1}). With a normal
 * observed-data conditional N(m, v) the tilt is N(m - eta v, v), and the
 * retention model marginalised over Y_{k+1} is again logistic:
 *
 *   logit P(R_{k+1} = 1 | history) = b0 + b1 Y_k + eta m - eta^2 v / 2.
 *
 * That identity is how (b0, b1) are estimated for a given eta.
 */

namespace ssa::longitudinal {

struct TiltedNormal {
  double mean = 0.0;
  double var = 1.0;
};

/// N(m, v) tilted by exp(-eta y) is N(m - eta v, v).
inline TiltedNormal tilted_conditional(double obs_mean, double obs_var, double eta) {
  require(obs_var > 0.0 && std::isfinite(obs_var), ErrorKind::invalid_argument, "variance must be positive");
  require(std::isfinite(obs_mean) && std::isfinite(eta), ErrorKind::invalid_argument,
          "mean and eta must be finite");
  return {obs_mean - eta * obs_var, obs_var};
}

/// Finite joint law of (T, R): P(T = t) and P(R = 1 | T = t) over a common support.
struct DiscreteJoint {
  std::vector<double> p_t;
  std::vector<double> p_r1_given_t;
};

/*
 * Checks f(t | R=0) = f(t | R=1) Q(t) / E(Q | R=1) with Q = P(R=0|t)/P(R=1|t),
 * enumerating both sides over the support.
 */
inline bool lemma1_discrete_check(const DiscreteJoint& joint, double tol = 1e-12) {
  const std::size_t n = joint.p_t.size();
  require(n >= 1 && joint.p_r1_given_t.size() == n, ErrorKind::invalid_argument, "support sizes differ");
  double p_r1 = 0.0;
  double p_r0 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double pt = joint.p_t[t];
    const double pr = joint.p_r1_given_t[t];
    require(pt >= 0.0 && pr >= 0.0 && pr <= 1.0, ErrorKind::invalid_argument, "probabilities out of range");
    require(pt == 0.0 || pr > 0.0, ErrorKind::invalid_argument,
            "P(R=1 | T) must be positive on the support for the odds to exist");
    p_r1 += pt * pr;
    p_r0 += pt * (1.0 - pr);
  }
  require(p_r1 > 0.0, ErrorKind::invalid_argument, "conditioning event R = 1 has probability zero");
  require(p_r0 > 0.0, ErrorKind::invalid_argument, "conditioning event R = 0 has probability zero");

  std::vector<double> q(n, 0.0);
  double eq_r1 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (joint.p_t[t] == 0.0) continue;
    q[t] = (1.0 - joint.p_r1_given_t[t]) / joint.p_r1_given_t[t];
    eq_r1 += q[t] * joint.p_t[t] * joint.p_r1_given_t[t] / p_r1;
  }
  for (std::size_t t = 0; t < n; ++t) {
    const double lhs = joint.p_t[t] * (1.0 - joint.p_r1_given_t[t]) / p_r0;
    const double f_r1 = joint.p_t[t] * joint.p_r1_given_t[t] / p_r1;
    const double rhs = f_r1 * q[t] / eq_r1;
    if (!(std::abs(lhs - rhs) <= tol)) return false;
  }
  return true;
}

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// n x M outcomes, NaN where missing. Visit 1 is always observed and dropout is monotone.
class PanelDataset {
 public:
  explicit PanelDataset(Eigen::MatrixXd outcomes) : y_(std::move(outcomes)) {
    require(y_.rows() >= 1, ErrorKind::invalid_data, "panel has no subjects");
    require(y_.cols() >= 2, ErrorKind::invalid_data, "panel needs at least two visits");
    observed_.resize(static_cast<std::size_t>(y_.rows()));
    for (Eigen::Index i = 0; i < y_.rows(); ++i) {
      const std::string row = "subject " + std::to_string(i + 1);
      require(!std::isnan(y_(i, 0)), ErrorKind::invalid_data, row + ": visit 1 must be observed");
      int count = 0;
      bool dropped = false;
      for (Eigen::Index k = 0; k < y_.cols(); ++k) {
        const double v = y_(i, k);
        if (std::isnan(v)) {
          dropped = true;
          continue;
        }
        require(!dropped, ErrorKind::invalid_data,
                row + ": observed at visit " + std::to_string(k + 1) + " after dropping out");
        require(std::isfinite(v), ErrorKind::invalid_data, row + ": non-finite outcome");
        ++count;
      }
      observed_[static_cast<std::size_t>(i)] = count;
    }
  }

  Eigen::Index subjects() const noexcept { return y_.rows(); }
  Eigen::Index visits() const noexcept { return y_.cols(); }
  const Eigen::MatrixXd& outcomes() const noexcept { return y_; }
  double value(Eigen::Index i, Eigen::Index k) const { return y_(i, k); }
  /// Number of observed visits d_i (1-based index of the last one).
  int last_observed(Eigen::Index i) const { return observed_[static_cast<std::size_t>(i)]; }
  bool observed(Eigen::Index i, Eigen::Index k) const { return k < last_observed(i); }

  std::size_t count_observed(Eigen::Index k) const {
    std::size_t c = 0;
    for (int d : observed_) c += d > k ? 1 : 0;
    return c;
  }

 private:
  Eigen::MatrixXd y_;
  std::vector<int> observed_;
};

/// Linear-normal model of Y_{k+1} given Y_1..Y_k among subjects observed at k+1.
struct VisitConditional {
  Eigen::VectorXd coef;  // intercept, then one slope per earlier visit
  double var = 1.0;
  std::size_t n = 0;

  double mean(const Eigen::Ref<const Eigen::RowVectorXd>& history) const {
    return coef(0) + history.dot(coef.tail(coef.size() - 1));
  }
};

/// Retention at one visit: logit = b0 + b1 Y_k + eta Y_{k+1}.
struct VisitSelection {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double eta = 0.0;
  double se_beta0 = 0.0;
  double se_beta1 = 0.0;
  std::vector<double> step_norms;
  int iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kMinVisitRows = 10;

/// Conditional of visit k + 1 (0-based column `next`) on all earlier visits.
inline VisitConditional fit_visit_conditional(const PanelDataset& data, Eigen::Index next) {
  require(next >= 1 && next < data.visits(), ErrorKind::invalid_argument, "visit index out of range");
  const std::size_t rows = data.count_observed(next);
  if (rows < kMinVisitRows) {
    fail(ErrorKind::insufficient_data, "visit " + std::to_string(next + 1) + " has " + std::to_string(rows) +
                                           " observed rows; at least 10 are needed");
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), next + 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < data.subjects(); ++i) {
    if (!data.observed(i, next)) continue;
    x(r, 0) = 1.0;
    for (Eigen::Index k = 0; k < next; ++k) x(r, k + 1) = data.value(i, k);
    y(r) = data.value(i, next);
    ++r;
  }
  const auto fit = ols(x, y);
  require(fit.sigma2 > 0.0, ErrorKind::numerically_degenerate,
          "visit " + std::to_string(next + 1) + " is an exact linear function of earlier visits");
  return {fit.coef, fit.sigma2, rows};
}

/*
 * Retention model for visit `next` given eta: logistic regression of R_{next}
 * on (1, Y_{next-1}) over subjects still in at visit next - 1, with offset
 * eta m(history) - eta^2 v / 2. At eta = 0 this is the plain logistic fit.
 */
inline VisitSelection fit_visit_selection(const PanelDataset& data, Eigen::Index next,
                                          const VisitConditional& cond, double eta) {
  Eigen::Index at_risk = 0;
  for (Eigen::Index i = 0; i < data.subjects(); ++i) at_risk += data.observed(i, next - 1) ? 1 : 0;
  Eigen::MatrixXd x(at_risk, 2);
  Eigen::VectorXd r(at_risk);
  Eigen::VectorXd offset(at_risk);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < data.subjects(); ++i) {
    if (!data.observed(i, next - 1)) continue;
    const Eigen::RowVectorXd history = data.outcomes().row(i).head(next);
    x(row, 0) = 1.0;
    x(row, 1) = data.value(i, next - 1);
    r(row) = data.observed(i, next) ? 1.0 : 0.0;
    offset(row) = eta * cond.mean(history) - 0.5 * eta * eta * cond.var;
    ++row;
  }
  const double kept = r.sum();
  require(kept > 0.0 && kept < static_cast<double>(at_risk), ErrorKind::fit_failure,
          "visit " + std::to_string(next + 1) + ": retention is all-or-nothing, so the selection model is not identified");
  LogisticFit lf;
  try {
    lf = logistic_regression(x, r, offset);
  } catch (const Error& e) {
    fail(e.kind(), "visit " + std::to_string(next + 1) + " at eta " + std::to_string(eta) + ": " + e.what());
  }
  VisitSelection s;
  s.beta0 = lf.coef(0);
  s.beta1 = lf.coef(1);
  s.eta = eta;
  s.se_beta0 = std::sqrt(lf.covariance(0, 0));
  s.se_beta1 = std::sqrt(lf.covariance(1, 1));
  s.step_norms = lf.step_norms;
  s.iterations = lf.iterations;
  s.converged = lf.converged;
  return s;
}

struct PanelFit {
  std::vector<double> etas;                 // one per visit 2..M
  std::vector<VisitConditional> conditionals;
  std::vector<VisitSelection> selections;
  Eigen::VectorXd visit_means;              // completed-data means, missing values at their tilted means
};

/// Per-visit conditional means m - eta v, filled in visit order.
inline Eigen::MatrixXd conditional_mean_fill(const PanelDataset& data, const std::vector<VisitConditional>& conds,
                                             const std::vector<double>& etas) {
  Eigen::MatrixXd filled = data.outcomes();
  for (Eigen::Index k = 1; k < data.visits(); ++k) {
    const auto& c = conds[static_cast<std::size_t>(k - 1)];
    const double shift = etas[static_cast<std::size_t>(k - 1)] * c.var;
    for (Eigen::Index i = 0; i < data.subjects(); ++i) {
      if (data.observed(i, k)) continue;
      filled(i, k) = c.mean(filled.row(i).head(k)) - shift;
    }
  }
  return filled;
}

inline std::vector<double> expand_etas(const std::vector<double>& etas, Eigen::Index visits) {
  const auto needed = static_cast<std::size_t>(visits - 1);
  if (etas.size() == 1 && needed > 1) return std::vector<double>(needed, etas.front());
  require(etas.size() == needed, ErrorKind::invalid_argument,
          "expected one eta per visit after the first (" + std::to_string(needed) + "), got " +
              std::to_string(etas.size()));
  for (double e : etas) require(std::isfinite(e), ErrorKind::invalid_argument, "eta must be finite");
  return etas;
}

/// Fits every visit's conditional and retention model. A single eta is shared by all visits.
inline PanelFit fit_panel(const PanelDataset& data, const std::vector<double>& etas) {
  PanelFit fit;
  fit.etas = expand_etas(etas, data.visits());
  for (Eigen::Index k = 1; k < data.visits(); ++k) {
    fit.conditionals.push_back(fit_visit_conditional(data, k));
    fit.selections.push_back(
        fit_visit_selection(data, k, fit.conditionals.back(), fit.etas[static_cast<std::size_t>(k - 1)]));
  }
  fit.visit_means = conditional_mean_fill(data, fit.conditionals, fit.etas).colwise().mean().transpose();
  return fit;
}

struct TwoVisitFit {
  VisitSelection selection;
  VisitConditional conditional;
  double mu_hat = 0.0;  // estimated mean of Y_2 over all subjects
};

inline TwoVisitFit fit_two_visit(const PanelDataset& data, double eta) {
  require(data.visits() == 2, ErrorKind::invalid_argument, "two-visit fit needs exactly two visits");
  const auto full = fit_panel(data, {eta});
  return {full.selections.front(), full.conditionals.front(), full.visit_means(1)};
}

struct CompletedPanel {
  Eigen::MatrixXd values;
  std::vector<std::vector<bool>> imputed;  // [subject][visit]
};

/*
 * Visit by visit: fit Y_{k+1} on the history among subjects observed at
 * k + 1, tilt by exp(-eta_{k+1} Y_{k+1}) and draw the missing values given the
 * filled history. Use eta = 0 for visits treated as MAR.
 */
inline CompletedPanel sequential_impute(const PanelDataset& data, const std::vector<double>& etas, Rng& rng) {
  const auto e = expand_etas(etas, data.visits());
  CompletedPanel out;
  out.values = data.outcomes();
  out.imputed.assign(static_cast<std::size_t>(data.subjects()),
                     std::vector<bool>(static_cast<std::size_t>(data.visits()), false));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 1; k < data.visits(); ++k) {
    const auto cond = fit_visit_conditional(data, k);
    const double shift = e[static_cast<std::size_t>(k - 1)] * cond.var;
    const double sd = std::sqrt(cond.var);
    for (Eigen::Index i = 0; i < data.subjects(); ++i) {
      if (data.observed(i, k)) continue;
      out.values(i, k) = cond.mean(out.values.row(i).head(k)) - shift + sd * normal(rng);
      out.imputed[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = true;
    }
  }
  return out;
}

/*
 * Completes the panel from the fitted model (observed entries are kept,
 * missing ones drawn from the tilted conditionals) and then applies the
 * fitted retention model to every subject, visit by visit.
 */
inline PanelDataset simulate_panel_observed(const PanelFit& fit, const PanelDataset& data, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd complete = data.outcomes();
  for (Eigen::Index k = 1; k < data.visits(); ++k) {
    const auto& c = fit.conditionals[static_cast<std::size_t>(k - 1)];
    const double shift = fit.etas[static_cast<std::size_t>(k - 1)] * c.var;
    const double sd = std::sqrt(c.var);
    for (Eigen::Index i = 0; i < data.subjects(); ++i) {
      if (data.observed(i, k)) continue;
      complete(i, k) = c.mean(complete.row(i).head(k)) - shift + sd * normal(rng);
    }
  }
  Eigen::MatrixXd out = complete;
  for (Eigen::Index i = 0; i < data.subjects(); ++i) {
    bool in = true;
    for (Eigen::Index k = 1; k < data.visits(); ++k) {
      if (in) {
        const auto& s = fit.selections[static_cast<std::size_t>(k - 1)];
        in = unif(rng) < expit(s.beta0 + s.beta1 * complete(i, k - 1) + s.eta * complete(i, k));
      }
      if (!in) out(i, k) = kMissing;
    }
  }
  return PanelDataset(std::move(out));
}

/// Full trajectories of the subjects observed at every visit.
inline PointCloud completers_view(const PanelDataset& data) {
  std::vector<double> coords;
  const Eigen::Index m = data.visits();
  for (Eigen::Index i = 0; i < data.subjects(); ++i) {
    if (data.last_observed(i) != m) continue;
    for (Eigen::Index k = 0; k < m; ++k) coords.push_back(data.value(i, k));
  }
  if (coords.empty()) fail(ErrorKind::simulation_infeasible, "no subject completed every visit");
  return PointCloud(static_cast<std::size_t>(m), std::move(coords));
}

inline PointCloud simulate_two_visit_observed(const TwoVisitFit& fit, double eta, const PanelDataset& data,
                                              Rng& rng) {
  require(data.visits() == 2, ErrorKind::invalid_argument, "two-visit simulation needs exactly two visits");
  PanelFit full;
  full.etas = {eta};
  full.conditionals = {fit.conditional};
  full.selections = {fit.selection};
  full.selections.front().eta = eta;
  return completers_view(simulate_panel_observed(full, data, rng));
}

/*
 * Sensitivity model over eta. The grid point holds either one eta shared by
 * all visits or one eta per visit after the first. The estimate of interest
 * is the completed-data mean at the last visit.
 */
class DropoutModel {
 public:
  using data_type = PanelDataset;

  struct fit_type {
    PanelFit estimate;
    PanelDataset data;  // simulation completes the observed panel itself
  };

  fit_type fit(const SensitivityPoint& eta, const data_type& data) const {
    return {fit_panel(data, eta.values), data};
  }

  data_type simulate_observed(const fit_type& f, const SensitivityPoint&, Rng& rng) const {
    return simulate_panel_observed(f.estimate, f.data, rng);
  }

  PointCloud comparison_view(const data_type& data) const { return completers_view(data); }

  FitResult summarize(const fit_type& f) const {
    const auto& e = f.estimate;
    FitResult r;
    const Eigen::Index m = e.visit_means.size();
    r.estimates = {{"mu_visit_" + std::to_string(m), e.visit_means(m - 1)}};
    for (std::size_t k = 0; k < e.selections.size(); ++k) {
      const std::string v = std::to_string(k + 2);
      r.nuisance.push_back({"beta0_visit_" + v, e.selections[k].beta0});
      r.nuisance.push_back({"beta1_visit_" + v, e.selections[k].beta1});
      r.iterations += e.selections[k].iterations;
    }
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
      r.nuisance.push_back({"mu_visit_" + std::to_string(k + 1), e.visit_means(k)});
    }
    r.converged = true;
    return r;
  }
};

static_assert(SensitivityModel<DropoutModel>);

struct PanelGenerator {
  std::size_t n = 1000;
  int visits = 2;
  double y1_mean = 0.0;
  double y1_sd = 1.0;
  double intercept = 0.0;  // E(Y_{k+1} | Y_k, R=1) = intercept + slope Y_k
  double slope = 1.0;
  double noise_var = 1.0;
  double beta0 = 1.0;
  double beta1 = 0.0;
  double eta = 0.0;
};

struct GeneratedPanel {
  PanelDataset observed;
  Eigen::MatrixXd complete;
};

/*
 * Draws a panel that satisfies the retention model exactly: a subject at risk
 * stays with probability expit(b0 + b1 y_k + eta m - eta^2 v / 2) and then
 * has Y_{k+1} ~ N(m, v); otherwise Y_{k+1} ~ N(m - eta v, v). Dropouts keep
 * evolving with the same recursion so the complete data are available.
 */
inline GeneratedPanel generate_panel(const PanelGenerator& g, Rng& rng) {
  require(g.visits >= 2 && g.n >= 1 && g.noise_var > 0.0 && g.y1_sd > 0.0, ErrorKind::invalid_argument,
          "invalid panel generator settings");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(g.n);
  Eigen::MatrixXd complete(n, g.visits);
  Eigen::MatrixXd observed(n, g.visits);
  const double sd = std::sqrt(g.noise_var);
  for (Eigen::Index i = 0; i < n; ++i) {
    complete(i, 0) = g.y1_mean + g.y1_sd * normal(rng);
    observed(i, 0) = complete(i, 0);
    bool in = true;
    for (Eigen::Index k = 1; k < g.visits; ++k) {
      const double m = g.intercept + g.slope * complete(i, k - 1);
      if (in) {
        const double logit = g.beta0 + g.beta1 * complete(i, k - 1) + g.eta * m - 0.5 * g.eta * g.eta * g.noise_var;
        in = unif(rng) < expit(logit);
        complete(i, k) = (in ? m : m - g.eta * g.noise_var) + sd * normal(rng);
      } else {
        complete(i, k) = m + sd * normal(rng);
      }
      observed(i, k) = in ? complete(i, k) : kMissing;
    }
  }
  return {PanelDataset(std::move(observed)), std::move(complete)};
}

}  // namespace ssa::longitudinal
