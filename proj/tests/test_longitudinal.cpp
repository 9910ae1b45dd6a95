#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ssa/models/longitudinal.hpp"

namespace lg = ssa::longitudinal;

namespace {

lg::PanelGenerator two_visit_generator(std::size_t n, double eta) {
  lg::PanelGenerator g;
  g.n = n;
  g.visits = 2;
  g.y1_mean = 12.0;
  g.y1_sd = 1.5;
  g.intercept = 3.0;
  g.slope = 1.0;
  g.noise_var = 1.0;
  g.beta0 = 1.0;
  g.beta1 = 0.05;
  g.eta = eta;
  return g;
}

}  // namespace

TEST(TiltedConditional, ExamplesAndOracle) {
  const auto t0 = lg::tilted_conditional(3.0, 2.0, 0.0);
  EXPECT_EQ(t0.mean, 3.0);
  EXPECT_EQ(t0.var, 2.0);
  const auto t = lg::tilted_conditional(15.04, 1.98 * 1.98, -0.2);
  EXPECT_NEAR(t.mean, 15.82408, 1e-12);
  EXPECT_EQ(t.var, 1.98 * 1.98);
  for (double m : {-4.0, 0.0, 15.04}) {
    for (double v : {0.2, 1.0, 3.9204}) {
      for (double eta : {-1.5, -0.2, 0.7}) {
        EXPECT_NEAR(lg::tilted_conditional(m, v, eta).mean, oracle::tilted_mean(m, v, eta), 1e-8);
      }
    }
  }
  EXPECT_THROW(lg::tilted_conditional(0.0, 0.0, 1.0), ssa::Error);
}

TEST(Lemma1, Examples) {
  EXPECT_TRUE(lg::lemma1_discrete_check({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.25, 0.5, 0.75}}));
  EXPECT_TRUE(lg::lemma1_discrete_check({{0.2, 0.5, 0.3}, {0.6, 0.6, 0.6}}));
  try {
    lg::lemma1_discrete_check({{0.5, 0.5}, {1.0, 1.0}});
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::invalid_argument);
  }
}

TEST(Lemma1, RandomJointDistributions) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size_d(1, 8);
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(size_d(rng));
    lg::DiscreteJoint j;
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      j.p_t.push_back(gamma1(rng));
      total += j.p_t.back();
      j.p_r1_given_t.push_back(u(rng));
    }
    for (double& p : j.p_t) p /= total;
    EXPECT_TRUE(lg::lemma1_discrete_check(j)) << "trial " << trial;
  }
}

TEST(Panel, RejectsNonMonotoneAndBadShapes) {
  Eigen::MatrixXd y(2, 3);
  y << 1.0, 2.0, 3.0, 1.0, lg::kMissing, 2.0;
  try {
    lg::PanelDataset p(y);
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::invalid_data);
    EXPECT_NE(std::string(e.what()).find("subject 2"), std::string::npos);
  }
  Eigen::MatrixXd first(1, 2);
  first << lg::kMissing, 1.0;
  EXPECT_THROW(lg::PanelDataset{first}, ssa::Error);
  EXPECT_THROW(lg::PanelDataset{Eigen::MatrixXd::Zero(3, 1)}, ssa::Error);
}

TEST(Panel, TooFewRowsAtAVisit) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(30, 2, lg::kMissing);
  for (int i = 0; i < 30; ++i) y(i, 0) = i;
  for (int i = 0; i < 9; ++i) y(i, 1) = 2.0 * i + (i % 3);
  try {
    lg::fit_visit_conditional(lg::PanelDataset(y), 1);
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::insufficient_data);
  }
}

TEST(TwoVisit, MarFitSolvesLogisticScoreEquations) {
  ssa::Rng rng(2);
  const auto panel = lg::generate_panel(two_visit_generator(800, 0.0), rng).observed;
  const auto fit = lg::fit_two_visit(panel, 0.0);
  // the plain logistic MLE of R_2 on (1, Y_1) makes the score vanish
  double s0 = 0.0;
  double s1 = 0.0;
  for (Eigen::Index i = 0; i < panel.subjects(); ++i) {
    const double r = panel.observed(i, 1) ? 1.0 : 0.0;
    const double p = ssa::expit(fit.selection.beta0 + fit.selection.beta1 * panel.value(i, 0));
    s0 += r - p;
    s1 += (r - p) * panel.value(i, 0);
  }
  EXPECT_NEAR(s0, 0.0, 1e-8);
  EXPECT_NEAR(s1, 0.0, 1e-7);
}

TEST(TwoVisit, RecoversSelectionParametersAtLargeSample) {
  for (double eta : {-0.3, 0.0, 0.4}) {
    ssa::Rng rng(3);
    const auto g = two_visit_generator(5000, eta);
    const auto panel = lg::generate_panel(g, rng).observed;
    const auto fit = lg::fit_two_visit(panel, eta);
    EXPECT_LT(std::abs(fit.selection.beta0 - g.beta0), 3.0 * fit.selection.se_beta0) << "eta " << eta;
    EXPECT_LT(std::abs(fit.selection.beta1 - g.beta1), 3.0 * fit.selection.se_beta1) << "eta " << eta;
  }
}

TEST(TwoVisit, NewtonStepsContract) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ssa::Rng rng(seed);
    const double eta = -0.2 + 0.04 * static_cast<double>(seed);
    const auto panel = lg::generate_panel(two_visit_generator(600, eta), rng).observed;
    const auto fit = lg::fit_two_visit(panel, eta);
    ASSERT_TRUE(fit.selection.converged);
    const auto& s = fit.selection.step_norms;
    const std::size_t from = s.size() > 5 ? s.size() - 5 : 0;
    for (std::size_t i = from + 1; i < s.size(); ++i) EXPECT_LT(s[i], s[i - 1]) << "seed " << seed;
  }
}

TEST(TwoVisit, FittedModelReproducesMissingFraction) {
  ssa::Rng rng(4);
  const double eta = -0.2;
  const auto panel = lg::generate_panel(two_visit_generator(2348, eta), rng).observed;
  const double observed_missing = 1.0 - static_cast<double>(panel.count_observed(1)) / 2348.0;
  const auto fit = lg::fit_two_visit(panel, eta);
  lg::PanelFit full;
  full.etas = {eta};
  full.conditionals = {fit.conditional};
  full.selections = {fit.selection};
  double missing = 0.0;
  const int sims = 20;
  for (int r = 0; r < sims; ++r) {
    const auto sim = lg::simulate_panel_observed(full, panel, rng);
    missing += 1.0 - static_cast<double>(sim.count_observed(1)) / 2348.0;
  }
  missing /= sims;
  const double se = std::sqrt(observed_missing * (1.0 - observed_missing) / 2348.0);
  EXPECT_NEAR(missing, observed_missing, 3.0 * se);
}

TEST(TwoVisit, SimulationWithCertainRetentionReturnsCompletedData) {
  ssa::Rng rng(5);
  const auto panel = lg::generate_panel(two_visit_generator(200, 0.0), rng).observed;
  auto fit = lg::fit_two_visit(panel, 0.0);
  fit.selection.beta0 = 1e3;
  fit.selection.beta1 = 0.0;
  const auto view = lg::simulate_two_visit_observed(fit, 0.0, panel, rng);
  EXPECT_EQ(view.size(), 200u);
}

TEST(TwoVisit, MuHatMatchesPanelFit) {
  ssa::Rng rng(6);
  const auto panel = lg::generate_panel(two_visit_generator(300, -0.1), rng).observed;
  EXPECT_EQ(lg::fit_two_visit(panel, -0.1).mu_hat, lg::fit_panel(panel, {-0.1}).visit_means(1));
}

TEST(SequentialImpute, MarIsUnbiased) {
  lg::PanelGenerator g;
  g.n = 400;
  g.visits = 3;
  g.intercept = 1.0;
  g.slope = 0.8;
  g.beta0 = 0.5;
  g.beta1 = 0.6;
  g.eta = 0.0;
  std::vector<double> d2;
  std::vector<double> d3;
  for (std::uint64_t r = 0; r < 40; ++r) {
    ssa::Rng rng(1000 + r);
    const auto gen = lg::generate_panel(g, rng);
    const auto done = lg::sequential_impute(gen.observed, {0.0, 0.0}, rng);
    d2.push_back(done.values.col(1).mean() - gen.complete.col(1).mean());
    d3.push_back(done.values.col(2).mean() - gen.complete.col(2).mean());
    for (Eigen::Index i = 0; i < gen.observed.subjects(); ++i) {
      for (Eigen::Index k = 0; k < 3; ++k) {
        EXPECT_EQ(done.imputed[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)], !gen.observed.observed(i, k));
      }
    }
  }
  for (const auto* d : {&d2, &d3}) {
    const double m = ssa::mean_of(*d);
    const double se = std::sqrt(ssa::variance_of(*d) / static_cast<double>(d->size()));
    EXPECT_LT(std::abs(m), 3.0 * se);
  }
}

TEST(SequentialImpute, NegativeEtaShiftsImputedMeanUp) {
  lg::PanelGenerator g;
  g.n = 3000;
  g.visits = 3;
  g.slope = 0.9;
  g.beta0 = 0.3;
  g.beta1 = 0.2;
  ssa::Rng rng(7);
  const auto panel = lg::generate_panel(g, rng).observed;
  const auto cond = lg::fit_visit_conditional(panel, 2);
  const double eta = -0.5;
  const auto done = lg::sequential_impute(panel, {0.0, eta}, rng);
  std::vector<double> resid;
  for (Eigen::Index i = 0; i < panel.subjects(); ++i) {
    if (panel.observed(i, 2)) continue;
    resid.push_back(done.values(i, 2) - cond.mean(done.values.row(i).head(2)));
  }
  const double m = ssa::mean_of(resid);
  const double se = std::sqrt(cond.var / static_cast<double>(resid.size()));
  EXPECT_NEAR(m, -eta * cond.var, 3.0 * se);
  EXPECT_NEAR(ssa::variance_of(resid), cond.var, 0.15 * cond.var);
  EXPECT_THROW(lg::sequential_impute(panel, {0.0, 0.1, 0.2}, rng), ssa::Error);
}

TEST(DropoutModel, SweepRunsAndReportsVisitMean) {
  ssa::Rng rng(8);
  const auto panel = lg::generate_panel(two_visit_generator(300, -0.1), rng).observed;
  std::vector<ssa::SensitivityPoint> pts;
  for (double e : ssa::SensitivityGrid::linspace(-0.2, 0.2, 5)) pts.push_back({{e}});
  ssa::SsaConfig cfg;
  cfg.mc_size = 5;
  cfg.perm.n_perm = 50;
  const auto cells = ssa::run_sweep(lg::DropoutModel{}, panel, ssa::SensitivityGrid({"eta"}, pts), cfg);
  ASSERT_EQ(cells.size(), 5u);
  for (const auto& c : cells) {
    ASSERT_FALSE(c.failed) << c.diagnostic;
    EXPECT_EQ(c.fit.estimates.front().name, "mu_visit_2");
  }
  // a more negative eta implies heavier missing outcomes
  EXPECT_GT(cells.front().fit.primary(), cells.back().fit.primary());
}
