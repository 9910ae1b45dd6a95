// One dataset from the logistic self-selection model, swept over eta.

#include <cstdio>

#include "ssa/ssa.hpp"

int main() {
  ssa::Rng rng(11);
  // X ~ N(0, 1), P(observed | x) = expit(-x): large values tend to go missing
  const auto data = ssa::mean::generate_incomplete(100, 0.0, 1.0, -1.0, 0.0, rng);
  std::printf("observed %zu of 100, complete-case mean %.4f\n", data.x_obs.size(), ssa::mean_of(data.x_obs));

  std::vector<ssa::SensitivityPoint> pts;
  for (double e : ssa::SensitivityGrid::linspace(-3.0, 1.0, 21)) pts.push_back({{e}});
  ssa::SsaConfig cfg;
  cfg.mc_size = 50;
  cfg.perm.n_perm = 500;
  cfg.seed = 3;
  const auto cells = ssa::run_sweep(ssa::mean::MeanModel{}, data, ssa::SensitivityGrid({"eta"}, pts), cfg);

  for (const auto& c : cells) {
    std::printf("eta %5.2f  mu_hat %7.4f  dist %.4f  asl %.3f %s\n", c.eta[0], c.fit.primary(), c.mean_distance,
                c.asl, c.plausible ? "*" : "");
  }
  const auto ranges = ssa::estimate_ranges(ssa::plausible_set(cells, cfg.alpha));
  if (!ranges.empty()) std::printf("plausible mu_hat range [%.4f, %.4f]\n", ranges[0].lo, ranges[0].hi);
  const auto best = ssa::most_plausible(cells);
  std::printf("most plausible eta %.2f, mu_hat %.4f (truth 0)\n", best.eta[0], best.fit.primary());
}
