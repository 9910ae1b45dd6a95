// Copas sweep over (a, b) on a synthetic set of published studies.

#include <cstdio>
#include <vector>

#include "ssa/ssa.hpp"

int main() {
  ssa::Rng rng(2024);
  ssa::meta::MetaFit truth;
  truth.mu = 0.15;
  truth.tau2 = 0.02;
  truth.rho = 0.7;
  const std::vector<double> s_pool{0.08, 0.12, 0.2, 0.3, 0.45, 0.6};
  const auto data = ssa::meta::simulate_selected(truth, -1.2, 0.3, s_pool, 40, rng);

  const auto naive = ssa::meta::fit_copas(data, 30.0, 0.0);
  std::printf("no selection: mu_hat %.4f tau2 %.4f\n", naive.mu, naive.tau2);

  const auto grid = ssa::SensitivityGrid::cartesian(
      {"a", "b"}, {ssa::SensitivityGrid::linspace(-2.0, 0.0, 5), ssa::SensitivityGrid::linspace(0.1, 0.9, 5)});
  ssa::SsaConfig cfg;
  cfg.mc_size = 20;
  cfg.perm.n_perm = 200;
  cfg.seed = 7;
  const auto cells = ssa::run_sweep(ssa::meta::CopasModel{}, data, grid, cfg);

  std::printf("%6s %6s %8s %8s %6s\n", "a", "b", "mu_hat", "dist", "asl");
  for (const auto& c : cells) {
    if (c.failed) {
      std::printf("%6.2f %6.2f  failed: %s\n", c.eta[0], c.eta[1], c.diagnostic.c_str());
      continue;
    }
    std::printf("%6.2f %6.2f %8.4f %8.4f %6.3f%s\n", c.eta[0], c.eta[1], c.fit.primary(), c.mean_distance, c.asl,
                c.plausible ? "" : "  rejected");
  }
  try {
    const auto best = ssa::most_plausible(cells);
    std::printf("most plausible (a, b) = (%.2f, %.2f), mu_hat %.4f (truth %.2f)\n", best.eta[0], best.eta[1],
                best.fit.primary(), truth.mu);
  } catch (const ssa::Error& e) {
    std::printf("%s\n", e.what());
  }
}
