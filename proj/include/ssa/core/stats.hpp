#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"

namespace ssa {

inline double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_log_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + z * z / var);
}

/*
 * log of the standard normal CDF, finite for every finite argument.
 * Below -37 erfc is close to underflow, so the Mills-ratio expansion
 *   log Phi(x) = -x^2/2 - log(-x) - log(2 pi)/2 + log(1 - 1/x^2 + 3/x^4 - ...)
 * takes over; six terms keep the truncation error under 1e-15 there.
 */
inline double log_normal_cdf(double x) {
  if (x >= 0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x >= -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  const double inv2 = 1.0 / (x * x);
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * inv2;
    series += term;
  }
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample variance, denominator n - 1.
inline double variance_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

struct OlsFit {
  Eigen::VectorXd coef;
  double rss = 0.0;
  double sigma2 = 0.0;  // rss / (n - p)
  Eigen::MatrixXd xtx_inverse;
  Eigen::Index n = 0;

  Eigen::VectorXd standard_errors() const {
    return (sigma2 * xtx_inverse.diagonal().array()).sqrt().matrix();
  }
};

/// Least squares via column-pivoted QR. Rank deficiency is a fit failure.
inline OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  require(n > p, ErrorKind::fit_failure,
          "least squares needs more rows (" + std::to_string(n) + ") than columns (" +
              std::to_string(p) + ")");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  require(qr.rank() == p, ErrorKind::fit_failure, "rank-deficient design matrix");

  OlsFit fit;
  fit.n = n;
  fit.coef = qr.solve(response);
  fit.rss = (response - design * fit.coef).squaredNorm();
  fit.sigma2 = fit.rss / static_cast<double>(n - p);
  fit.xtx_inverse = (design.transpose() * design).inverse();
  return fit;
}

struct LogisticFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;       // inverse Fisher information at coef
  std::vector<double> step_norms;   // max |delta coef| per Newton step
  int iterations = 0;
  bool converged = false;
};

/*
 * Logistic regression with a fixed per-row offset:
 *   logit P(y = 1) = offset + X coef.
 * Newton-Raphson (IRLS) with step halving whenever a full step lowers the
 * log-likelihood, which keeps large offsets from throwing the first steps
 * off. Separation shows up as runaway coefficients and is reported as a fit
 * failure.
 */
inline LogisticFit logistic_regression(const Eigen::MatrixXd& design,
                                       const Eigen::VectorXd& outcome,
                                       const Eigen::VectorXd& offset,
                                       int max_iterations = 50, double tolerance = 1e-10) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  require(outcome.size() == n && offset.size() == n, ErrorKind::invalid_argument,
          "logistic regression: size mismatch");

  auto loglik = [&](const Eigen::VectorXd& coef) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = offset(i) + design.row(i).dot(coef);
      // log(1 + e^eta) without overflow
      const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      ll += outcome(i) * eta - softplus;
    }
    return ll;
  };

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  double current = loglik(fit.coef);
  Eigen::MatrixXd information(p, p);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    information.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = offset(i) + design.row(i).dot(fit.coef);
      const double prob = expit(eta);
      const double w = prob * (1.0 - prob);
      score += (outcome(i) - prob) * design.row(i).transpose();
      information.noalias() += w * design.row(i).transpose() * design.row(i);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      fail(ErrorKind::fit_failure, "logistic regression: singular information matrix");
    }
    Eigen::VectorXd step = ldlt.solve(score);
    double next = loglik(fit.coef + step);
    for (int halving = 0; halving < 30 && !(next >= current); ++halving) {
      step *= 0.5;
      next = loglik(fit.coef + step);
    }
    fit.coef += step;
    current = next;
    fit.iterations = it + 1;
    const double norm = step.cwiseAbs().maxCoeff();
    fit.step_norms.push_back(norm);
    if (!fit.coef.allFinite() || fit.coef.cwiseAbs().maxCoeff() > 1e6) {
      fail(ErrorKind::fit_failure,
           "logistic regression diverged (likely complete or quasi-complete separation)");
    }
    if (norm < tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    fail(ErrorKind::fit_failure, "logistic regression did not converge in " +
                                     std::to_string(max_iterations) +
                                     " iterations (possible separation)");
  }
  fit.covariance = information.inverse();
  return fit;
}

}  // namespace ssa
