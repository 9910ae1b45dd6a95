#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/knn.hpp"
#include "ssa/types.hpp"

namespace ssa {

enum class PermutationMode {
  pooled,    // split observed + replicate
  internal,  // split two distinct replicates, no observed data
};

struct PermutationConfig {
  int n_perm = 1000;
  PermutationMode mode = PermutationMode::pooled;
  std::uint64_t seed = 0;
};

struct PermutationResult {
  double observed_statistic = 0.0;  // mean KNN distance, observed vs each replicate
  double asl = 0.0;
  int exceedances = 0;
  int n_perm = 0;
};

namespace permute_detail {

inline PointCloud take(const std::vector<double>& pool, std::size_t dim,
                       const std::vector<std::size_t>& index, std::size_t from, std::size_t to) {
  std::vector<double> coords;
  coords.reserve((to - from) * dim);
  for (std::size_t i = from; i < to; ++i) {
    const std::size_t p = index[i];
    coords.insert(coords.end(), pool.begin() + static_cast<std::ptrdiff_t>(p * dim),
                  pool.begin() + static_cast<std::ptrdiff_t>((p + 1) * dim));
  }
  return PointCloud(dim, std::move(coords));
}

// Distance between a random split of first ∪ second into groups of the
// original sizes.
inline double split_distance(const PointCloud& first, const PointCloud& second,
                             const KnnConfig& knn, Rng& rng) {
  const std::size_t dim = first.dim();
  std::vector<double> pool(first.coords().begin(), first.coords().end());
  pool.insert(pool.end(), second.coords().begin(), second.coords().end());
  std::vector<std::size_t> index(first.size() + second.size());
  std::iota(index.begin(), index.end(), 0);
  std::shuffle(index.begin(), index.end(), rng);
  const auto g1 = take(pool, dim, index, 0, first.size());
  const auto g2 = take(pool, dim, index, first.size(), index.size());
  return knn_distance(g1, g2, knn);
}

}  // namespace permute_detail

/*
 * Achieved significance level of a candidate model. The observed statistic is
 * the mean KNN distance between the observed cloud and each Monte Carlo
 * replicate. Draw i uses replicate i mod R: in pooled mode the observed cloud
 * and that replicate are pooled and split at random into groups of the
 * original sizes; in internal mode replicates i mod R and (i + 1) mod R are
 * pooled instead. The ASL is the fraction of draws whose split distance is at
 * least the observed statistic. Draw i always uses the stream derived from
 * (seed, i).
 */
inline PermutationResult permutation_test(const PointCloud& observed,
                                          const std::vector<PointCloud>& replicates,
                                          const KnnConfig& knn, const PermutationConfig& cfg) {
  require(!replicates.empty(), ErrorKind::invalid_argument, "permutation test needs at least one replicate");
  require(cfg.n_perm >= 1, ErrorKind::invalid_argument, "n_perm must be positive");
  const auto min_size = static_cast<std::size_t>(knn.k) + 1;
  require(observed.size() >= min_size, ErrorKind::invalid_argument,
          "observed cloud has fewer than k + 1 points");
  for (std::size_t r = 0; r < replicates.size(); ++r) {
    require(replicates[r].size() >= min_size, ErrorKind::invalid_argument,
            "replicate " + std::to_string(r) + " has " + std::to_string(replicates[r].size()) +
                " points, fewer than k + 1");
    require(replicates[r].dim() == observed.dim(), ErrorKind::invalid_argument,
            "replicate " + std::to_string(r) + " differs in dimension from the observed cloud");
  }
  const std::size_t reps = replicates.size();
  if (cfg.mode == PermutationMode::internal) {
    require(reps >= 2, ErrorKind::invalid_argument, "internal permutation mode needs two or more replicates");
  }

  PermutationResult out;
  out.n_perm = cfg.n_perm;
  double total = 0.0;
  for (const auto& rep : replicates) total += knn_distance(observed, rep, knn);
  out.observed_statistic = total / static_cast<double>(reps);

  for (int i = 0; i < cfg.n_perm; ++i) {
    Rng rng = make_stream(cfg.seed, {kTagPermutation, static_cast<std::uint64_t>(i)});
    const std::size_t r = static_cast<std::size_t>(i) % reps;
    const double s = cfg.mode == PermutationMode::pooled
                         ? permute_detail::split_distance(observed, replicates[r], knn, rng)
                         : permute_detail::split_distance(replicates[r], replicates[(r + 1) % reps], knn, rng);
    if (s >= out.observed_statistic) ++out.exceedances;
  }
  out.asl = static_cast<double>(out.exceedances) / static_cast<double>(cfg.n_perm);
  return out;
}

inline double asl(const PointCloud& observed, const std::vector<PointCloud>& replicates,
                  const KnnConfig& knn, const PermutationConfig& cfg) {
  return permutation_test(observed, replicates, knn, cfg).asl;
}

/// Cells whose ASL strictly exceeds alpha; failed cells never qualify.
inline std::vector<SsaCell> plausible_set(const std::vector<SsaCell>& cells, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_argument, "alpha must lie in (0, 1)");
  std::vector<SsaCell> out;
  for (const auto& c : cells) {
    if (!c.failed && c.asl > alpha) out.push_back(c);
  }
  return out;
}

}  // namespace ssa
