#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/parallel.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/knn.hpp"
#include "ssa/permute.hpp"
#include "ssa/types.hpp"

/**
 * @file engine.hpp
 *
 * Sensitivity sweep. For every candidate eta in the grid:
 *   1. fit the sensitivity model at eta,
 *   2. simulate mc_size incomplete replicates from the fitted model,
 *   3. score them against the observed data by mean KNN distance,
 *   4. attach the permutation ASL and the plausibility flag.
 */

namespace ssa {

/**
 * A sensitivity model bundles three capabilities over its own data and fit
 * types: fitting at a fixed eta, simulating a dataset comparable to the
 * observed one, and mapping a dataset to the point cloud used for comparison.
 * `summarize` exposes the fit in model-agnostic form. Implementations must be
 * usable read-only from several threads at once.
 */
template <class M>
concept SensitivityModel =
    requires(const M& model, const typename M::data_type& data, const typename M::fit_type& fit,
             const SensitivityPoint& eta, Rng& rng) {
      { model.fit(eta, data) } -> std::same_as<typename M::fit_type>;
      { model.simulate_observed(fit, eta, rng) } -> std::same_as<typename M::data_type>;
      { model.comparison_view(data) } -> std::same_as<PointCloud>;
      { model.summarize(fit) } -> std::same_as<FitResult>;
    };

struct SsaConfig {
  int mc_size = 100;
  KnnConfig knn{};
  PermutationConfig perm{};  // perm.seed is ignored; streams derive from `seed`
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

inline void validate(const SsaConfig& cfg) {
  require(cfg.mc_size >= 1, ErrorKind::invalid_argument, "mc_size must be at least 1");
  require(cfg.alpha > 0.0 && cfg.alpha < 1.0, ErrorKind::invalid_argument, "alpha must lie in (0, 1)");
  require(cfg.knn.k >= 1, ErrorKind::invalid_argument, "k must be at least 1");
  require(cfg.perm.n_perm >= 1, ErrorKind::invalid_argument, "n_perm must be positive");
}

/// Evaluates one grid point. Model and simulation errors mark the cell failed.
template <SensitivityModel M>
SsaCell evaluate_cell(const M& model, const typename M::data_type& observed,
                      const PointCloud& observed_view, const SensitivityPoint& eta,
                      const SsaConfig& cfg) {
  SsaCell cell;
  cell.eta = eta;
  const std::uint64_t key = eta.key();
  try {
    const auto fit = model.fit(eta, observed);
    cell.fit = model.summarize(fit);

    std::vector<PointCloud> replicates;
    replicates.reserve(static_cast<std::size_t>(cfg.mc_size));
    for (int r = 0; r < cfg.mc_size; ++r) {
      Rng rng = make_stream(cfg.seed, {kTagReplicate, key, static_cast<std::uint64_t>(r)});
      auto view = model.comparison_view(model.simulate_observed(fit, eta, rng));
      if (view.size() < static_cast<std::size_t>(cfg.knn.k) + 1) {
        fail(ErrorKind::simulation_infeasible,
             "replicate " + std::to_string(r) + " kept " + std::to_string(view.size()) +
                 " points, fewer than k + 1");
      }
      replicates.push_back(std::move(view));
    }

    PermutationConfig perm = cfg.perm;
    perm.seed = derive_seed(cfg.seed, {kTagPermutation, key});
    const auto test = permutation_test(observed_view, replicates, cfg.knn, perm);
    cell.mean_distance = test.observed_statistic;
    cell.asl = test.asl;
    cell.plausible = cell.asl > cfg.alpha;
  } catch (const Error& e) {
    cell.failed = true;
    cell.plausible = false;
    cell.diagnostic = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return cell;
}

/*
 * One cell per grid point, in grid order. Each cell's random streams are keyed
 * by the eta value and replicate index, so results do not depend on grid
 * order or on the number of workers.
 */
template <SensitivityModel M>
std::vector<SsaCell> run_sweep(const M& model, const typename M::data_type& observed,
                               const SensitivityGrid& grid, const SsaConfig& cfg) {
  validate(cfg);
  const PointCloud observed_view = model.comparison_view(observed);
  std::vector<SsaCell> cells(grid.size());
  parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
    cells[i] = evaluate_cell(model, observed, observed_view, grid.points()[i], cfg);
  });

  bool any_ok = false;
  std::string first_diagnostic;
  for (const auto& c : cells) {
    if (!c.failed) {
      any_ok = true;
      break;
    }
    if (first_diagnostic.empty()) first_diagnostic = c.diagnostic;
  }
  require(any_ok, ErrorKind::fit_failure, "every grid point failed; first failure: " + first_diagnostic);
  return cells;
}

/// Plausible cell with the smallest mean distance; ties go to the earliest cell.
inline SsaCell most_plausible(const std::vector<SsaCell>& cells) {
  const SsaCell* best = nullptr;
  for (const auto& c : cells) {
    if (c.failed || !c.plausible) continue;
    if (best == nullptr || c.mean_distance < best->mean_distance) best = &c;
  }
  if (best == nullptr) {
    fail(ErrorKind::no_plausible_model, "no plausible model: every candidate was rejected");
  }
  return *best;
}

/// Plausible cells within `tol` of the minimum mean distance.
inline std::vector<SsaCell> near_minimum_band(const std::vector<SsaCell>& cells, double tol) {
  require(tol >= 0.0, ErrorKind::invalid_argument, "band tolerance must be nonnegative");
  const double floor = most_plausible(cells).mean_distance;
  std::vector<SsaCell> out;
  for (const auto& c : cells) {
    if (!c.failed && c.plausible && c.mean_distance <= floor + tol) out.push_back(c);
  }
  return out;
}

struct EstimateRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

/// Per-estimate min/max over the given cells (normally a plausible set).
inline std::vector<EstimateRange> estimate_ranges(const std::vector<SsaCell>& cells) {
  std::vector<EstimateRange> out;
  for (const auto& c : cells) {
    if (c.failed) continue;
    if (out.empty()) {
      for (const auto& e : c.fit.estimates) out.push_back({e.name, e.value, e.value});
      continue;
    }
    for (std::size_t i = 0; i < out.size() && i < c.fit.estimates.size(); ++i) {
      out[i].lo = std::min(out[i].lo, c.fit.estimates[i].value);
      out[i].hi = std::max(out[i].hi, c.fit.estimates[i].value);
    }
  }
  return out;
}

}  // namespace ssa
