#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oracles.hpp"
#include "ssa/models/mean.hpp"

using ssa::mean::UnivariateIncomplete;

TEST(MdmProb, Examples) {
  for (double x : {-3.0, 0.0, 2.5}) EXPECT_DOUBLE_EQ(ssa::mean::mdm_prob(x, 0.0, 0.7), 0.5);
  for (double eta : {-4.0, 0.3, 9.0}) EXPECT_DOUBLE_EQ(ssa::mean::mdm_prob(-1.5, eta, 1.5), 0.5);
  EXPECT_NEAR(ssa::mean::mdm_prob(1.0, -1.0, 0.0), 0.2689414213699951, 1e-15);
  EXPECT_EQ(ssa::mean::mdm_prob(1e6, 1.0, 0.0), 1.0);
  EXPECT_EQ(ssa::mean::mdm_prob(-1e6, 1.0, 0.0), 0.0);
}

TEST(EstimateMu2, HandComputedAndMar) {
  const UnivariateIncomplete two{{0.0, 1.0}, 3, 0.0};
  EXPECT_NEAR(ssa::mean::estimate_mu2(two, std::log(2.0)), 1.0 / 3.0, 1e-15);
  const UnivariateIncomplete d{{0.3, -1.2, 2.2, 0.7}, 2, 0.4};
  EXPECT_DOUBLE_EQ(ssa::mean::estimate_mu2(d, 0.0), (0.3 - 1.2 + 2.2 + 0.7) / 4.0);
}

TEST(EstimateMu2, LocationEquivariant) {
  const UnivariateIncomplete d{{0.3, -1.2, 2.2, 0.7, 1.9}, 2, 0.4};
  UnivariateIncomplete shifted = d;
  for (double& x : shifted.x_obs) x += 5.0;
  shifted.lambda -= 5.0;
  for (double eta : {-2.0, -0.5, 1.0}) {
    EXPECT_NEAR(ssa::mean::estimate_mu2(shifted, eta), ssa::mean::estimate_mu2(d, eta) + 5.0, 1e-12);
  }
}

TEST(EstimateMu2, ExtremeEtaStaysFinite) {
  const UnivariateIncomplete d{{-3.0, 0.0, 4.0}, 1, 0.0};
  EXPECT_NEAR(ssa::mean::estimate_mu2(d, -500.0), 4.0, 1e-12);
  EXPECT_NEAR(ssa::mean::estimate_mu2(d, 500.0), -3.0, 1e-12);
  EXPECT_THROW(ssa::mean::estimate_mu2(d, 1e308), ssa::Error);
  EXPECT_THROW(ssa::mean::estimate_mu2(UnivariateIncomplete{}, 0.0), ssa::Error);
}

TEST(EstimateMu2, MatchesMissingPartMeanByQuadrature) {
  // X ~ N(0, 1), P(R = 1 | x) = expit(-x): E(X | R = 0) from the joint density directly.
  const double eta = -1.0;
  auto p_miss = [&](double x) { return 1.0 - ssa::mean::mdm_prob(x, eta, 0.0); };
  auto num = [&](double x) { return x * oracle::phi(x) * p_miss(x); };
  auto den = [&](double x) { return oracle::phi(x) * p_miss(x); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double truth = GK::integrate(num, -15.0, 15.0, 15, 1e-14) / GK::integrate(den, -15.0, 15.0, 15, 1e-14);

  // 40 independent samples of n = 20000 give a Monte Carlo SE for the estimator
  std::vector<double> est;
  for (std::uint64_t r = 0; r < 40; ++r) {
    ssa::Rng rng(100 + r);
    est.push_back(ssa::mean::estimate_mu2(ssa::mean::generate_incomplete(20000, 0.0, 1.0, eta, 0.0, rng), eta));
  }
  const double m = ssa::mean_of(est);
  const double se = std::sqrt(ssa::variance_of(est) / static_cast<double>(est.size()));
  EXPECT_LT(std::abs(m - truth), 3.0 * se) << "truth " << truth << " mean " << m;
}

TEST(ImputeMissing, ConvergesToWeightedMean) {
  ssa::Rng rng(1);
  auto data = ssa::mean::generate_incomplete(300, 0.0, 1.0, -1.0, 0.0, rng);
  data.n_missing = 100000;
  const auto draws = ssa::mean::impute_missing(data, -1.0, rng);
  const double m = ssa::mean_of(draws);
  const double se = std::sqrt(ssa::variance_of(draws) / static_cast<double>(draws.size()));
  EXPECT_LT(std::abs(m - ssa::mean::estimate_mu2(data, -1.0)), 3.0 * se);

  const UnivariateIncomplete two{{0.0, 1.0}, 60000, 0.0};
  const auto d2 = ssa::mean::impute_missing(two, std::log(2.0), rng);
  double ones = 0.0;
  for (double v : d2) ones += v;
  const double p = 1.0 / 3.0;
  EXPECT_NEAR(ones / 60000.0, p, 3.0 * std::sqrt(p * (1.0 - p) / 60000.0));
}

TEST(FitMean, EtaZeroGivesCompleteCaseMean) {
  ssa::Rng rng(2);
  const auto data = ssa::mean::generate_incomplete(100, 0.0, 1.0, -1.0, 0.0, rng);
  const auto fit = ssa::mean::fit_mean(data, 0.0);
  EXPECT_EQ(fit.mu_hat, ssa::mean_of(data.x_obs));
  ssa::mean::MeanModel model;
  EXPECT_EQ(model.summarize(model.fit({{0.0}}, data)).primary(), fit.mu_hat);
}

TEST(FitMean, OddsIdentityAtGeneratingEta) {
  // (pi / (1 - pi)) mean(exp(-eta x)) = 1 in expectation at the true eta
  const double eta = -1.0;
  std::vector<double> vals;
  for (std::uint64_t r = 0; r < 200; ++r) {
    ssa::Rng rng(500 + r);
    const auto data = ssa::mean::generate_incomplete(400, 0.0, 1.0, eta, 0.0, rng);
    double w = 0.0;
    for (double x : data.x_obs) w += std::exp(-eta * x);
    w /= static_cast<double>(data.x_obs.size());
    const double pi = static_cast<double>(data.x_obs.size()) / 400.0;
    vals.push_back(pi / (1.0 - pi) * w);
  }
  const double m = ssa::mean_of(vals);
  const double se = std::sqrt(ssa::variance_of(vals) / static_cast<double>(vals.size()));
  EXPECT_LT(std::abs(m - 1.0), 3.0 * se + 0.01);
}

TEST(MeanModel, SimulationKeepsSizeAndReappliesSelection) {
  ssa::Rng rng(3);
  const auto data = ssa::mean::generate_incomplete(200, 0.0, 1.0, -1.0, 0.0, rng);
  for (auto scheme : {ssa::mean::Imputation::tilted_normal, ssa::mean::Imputation::tilted_resample,
                      ssa::mean::Imputation::tilted_smoothed}) {
    ssa::mean::MeanModel model(scheme);
    const auto fit = model.fit({{-1.0}}, data);
    const auto sim = model.simulate_observed(fit, {{-1.0}}, rng);
    EXPECT_EQ(sim.x_obs.size() + sim.n_missing, 200u);
    EXPECT_GT(sim.x_obs.size(), 0u);
  }
  // eta = 0: everything is kept with probability 1/2
  ssa::mean::MeanModel model;
  const auto fit = model.fit({{0.0}}, data);
  std::size_t kept = 0;
  for (int r = 0; r < 50; ++r) kept += model.simulate_observed(fit, {{0.0}}, rng).x_obs.size();
  const double frac = static_cast<double>(kept) / (50.0 * 200.0);
  EXPECT_NEAR(frac, 0.5, 3.0 * std::sqrt(0.25 / 10000.0));
}

TEST(MeanModel, NormalSchemeNeedsSpread) {
  const UnivariateIncomplete flat{{1.0, 1.0, 1.0}, 2, 0.0};
  EXPECT_THROW(ssa::mean::MeanModel(ssa::mean::Imputation::tilted_normal).fit({{0.0}}, flat), ssa::Error);
  EXPECT_NO_THROW(ssa::mean::MeanModel().fit({{0.0}}, flat));
}

TEST(MeanStudy, SmallRunIsDeterministicAndSane) {
  ssa::mean::MeanStudyConfig cfg;
  cfg.replications = 4;
  cfg.eta_grid = ssa::SensitivityGrid::linspace(-3.0, 1.0, 9);
  ssa::SsaConfig sc;
  sc.mc_size = 10;
  sc.perm.n_perm = 100;
  sc.seed = 9;
  const auto a = ssa::mean::run_mean_study(cfg, sc);
  sc.workers = 3;
  const auto b = ssa::mean::run_mean_study(cfg, sc);
  ASSERT_EQ(a.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.rows[i].mu_hat, b.rows[i].mu_hat);
    EXPECT_EQ(a.rows[i].selected_eta, b.rows[i].selected_eta);
    if (a.rows[i].has_plausible) {
      EXPECT_LE(a.rows[i].range_lo, a.rows[i].mu_hat);
      EXPECT_GE(a.rows[i].range_hi, a.rows[i].mu_hat);
    }
  }
  EXPECT_GE(a.coverage, 0.0);
  EXPECT_LE(a.coverage, 1.0);
}
