#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssa/core/error.hpp"

/**
 * @file knn.hpp
 *
 * K-nearest-neighbour similarity between two point clouds.
 *
 * A point x is a neighbour of cloud D when some member x_i of D satisfies
 * d(x_i, x) < d_k(x_i), where d_k(x_i) is the distance from x_i to its k-th
 * nearest other member of D. The similarity of D and D* averages the fraction
 * of D* that neighbours D and the fraction of D that neighbours D*; the KNN
 * distance is one minus that.
 */

namespace ssa {

/// Set of equal-dimension points, stored row-major.
class PointCloud {
 public:
  PointCloud(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    require(dim_ >= 1, ErrorKind::invalid_argument, "point cloud dimension must be positive");
    require(coords_.size() % dim_ == 0, ErrorKind::invalid_argument,
            "coordinate count is not a multiple of the dimension");
    require(!coords_.empty(), ErrorKind::invalid_argument, "point cloud must hold at least one point");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!std::isfinite(coords_[i])) {
        fail(ErrorKind::invalid_data, "non-finite coordinate in point " + std::to_string(i / dim_));
      }
    }
  }

  static PointCloud from_rows(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), ErrorKind::invalid_argument, "point cloud must hold at least one point");
    const std::size_t dim = rows.front().size();
    std::vector<double> coords;
    coords.reserve(rows.size() * dim);
    for (const auto& row : rows) {
      require(row.size() == dim, ErrorKind::invalid_argument, "rows differ in dimension");
      coords.insert(coords.end(), row.begin(), row.end());
    }
    return PointCloud(dim, std::move(coords));
  }

  static PointCloud from_values(std::vector<double> values) {
    return PointCloud(1, std::move(values));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

struct KnnConfig {
  int k = 2;
  bool standardize = true;  // pooled z-scoring over both clouds
};

namespace knn_detail {

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

/// k-th smallest squared distance to the other points, by exhaustive search.
inline std::vector<double> radii2_exhaustive(std::span<const double> x, std::size_t dim, int k) {
  const std::size_t n = x.size() / dim;
  std::vector<double> radii(n);
  std::vector<double> buffer(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) buffer[m++] = squared_distance(&x[i * dim], &x[j * dim], dim);
    }
    std::nth_element(buffer.begin(), buffer.begin() + (k - 1), buffer.end());
    radii[i] = buffer[static_cast<std::size_t>(k - 1)];
  }
  return radii;
}

// One-dimensional case: after sorting, the k nearest neighbours of a point
// lie in a window around it; walk outward merging the two sides.
inline std::vector<double> radii2_line(std::span<const double> x, int k) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  std::vector<double> radii(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double xp = x[order[p]];
    std::ptrdiff_t left = static_cast<std::ptrdiff_t>(p) - 1;
    std::size_t right = p + 1;
    double current = 0.0;
    for (int step = 0; step < k; ++step) {
      const double dl = left >= 0 ? (xp - x[order[static_cast<std::size_t>(left)]]) : HUGE_VAL;
      const double dr = right < n ? (x[order[right]] - xp) : HUGE_VAL;
      const double dl2 = dl * dl;
      const double dr2 = dr * dr;
      if (dl2 <= dr2) {
        current = dl2;
        --left;
      } else {
        current = dr2;
        ++right;
      }
    }
    radii[order[p]] = current;
  }
  return radii;
}

inline std::vector<double> radii2(std::span<const double> x, std::size_t dim, int k) {
  return dim == 1 ? radii2_line(x, k) : radii2_exhaustive(x, dim, k);
}

inline bool covered_exhaustive(const double* query, std::span<const double> centers,
                               std::span<const double> radii2, std::size_t dim) {
  const std::size_t n = radii2.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (squared_distance(&centers[i * dim], query, dim) < radii2[i]) return true;
  }
  return false;
}

using Intervals = std::vector<std::pair<double, double>>;

// Union of open intervals as a sorted disjoint list.
inline Intervals merge_open(Intervals iv) {
  std::sort(iv.begin(), iv.end());
  Intervals out;
  for (const auto& [lo, hi] : iv) {
    if (!out.empty() && lo < out.back().second) {
      out.back().second = std::max(out.back().second, hi);
    } else {
      out.emplace_back(lo, hi);
    }
  }
  return out;
}

inline bool inside(const Intervals& iv, double y) {
  auto it = std::lower_bound(iv.begin(), iv.end(), y,
                             [](const std::pair<double, double>& a, double v) { return a.first < v; });
  if (it == iv.begin()) return false;
  --it;
  return y < it->second;
}

/*
 * Counts queries covered by at least one open ball (center, radius) on the
 * line. Two interval unions bracket the exact answer: balls shrunk by a small
 * margin (certainly covered) and grown by it (possibly covered). Only queries
 * falling between the two are settled by the exact squared-distance test, so
 * the count always equals the exhaustive one.
 */
inline std::size_t count_covered_line(std::span<const double> queries,
                                      std::span<const double> centers,
                                      std::span<const double> radii2) {
  double scale = 1.0;
  for (double v : queries) scale = std::max(scale, std::abs(v));
  for (double v : centers) scale = std::max(scale, std::abs(v));
  const double margin = 1e-9 * scale;

  Intervals shrunk;
  Intervals grown;
  shrunk.reserve(centers.size());
  grown.reserve(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double r = std::sqrt(radii2[i]);
    if (r > 2.0 * margin) shrunk.emplace_back(centers[i] - r + margin, centers[i] + r - margin);
    if (radii2[i] > 0.0) grown.emplace_back(centers[i] - r - margin, centers[i] + r + margin);
  }
  shrunk = merge_open(std::move(shrunk));
  grown = merge_open(std::move(grown));

  std::size_t count = 0;
  for (double y : queries) {
    if (inside(shrunk, y)) {
      ++count;
    } else if (inside(grown, y) && covered_exhaustive(&y, centers, radii2, 1)) {
      ++count;
    }
  }
  return count;
}

inline std::size_t count_covered(std::span<const double> queries, std::span<const double> centers,
                                 std::span<const double> radii2, std::size_t dim) {
  if (dim == 1) return count_covered_line(queries, centers, radii2);
  std::size_t count = 0;
  const std::size_t m = queries.size() / dim;
  for (std::size_t j = 0; j < m; ++j) {
    if (covered_exhaustive(&queries[j * dim], centers, radii2, dim)) ++count;
  }
  return count;
}

// z-score each coordinate with mean and sd pooled over both clouds; a constant
// coordinate is only centred.
inline void standardize_pooled(std::vector<double>& a, std::vector<double>& b, std::size_t dim) {
  const std::size_t total = (a.size() + b.size()) / dim;
  for (std::size_t d = 0; d < dim; ++d) {
    // Per-cloud partial sums added last, so swapping the clouds is exact.
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t i = d; i < a.size(); i += dim) sum_a += a[i];
    for (std::size_t i = d; i < b.size(); i += dim) sum_b += b[i];
    const double mean = (sum_a + sum_b) / static_cast<double>(total);
    double ss_a = 0.0;
    double ss_b = 0.0;
    for (std::size_t i = d; i < a.size(); i += dim) ss_a += (a[i] - mean) * (a[i] - mean);
    for (std::size_t i = d; i < b.size(); i += dim) ss_b += (b[i] - mean) * (b[i] - mean);
    const double ss = ss_a + ss_b;
    const double sd = total > 1 ? std::sqrt(ss / static_cast<double>(total - 1)) : 0.0;
    const double scale = sd > 0.0 && std::isfinite(sd) ? 1.0 / sd : 1.0;
    for (std::size_t i = d; i < a.size(); i += dim) a[i] = (a[i] - mean) * scale;
    for (std::size_t i = d; i < b.size(); i += dim) b[i] = (b[i] - mean) * scale;
  }
}

inline void check_k(int k, std::size_t size, const char* what) {
  require(k >= 1, ErrorKind::invalid_argument, "k must be at least 1");
  require(static_cast<std::size_t>(k) < size, ErrorKind::invalid_argument,
          std::string("k = ") + std::to_string(k) + " needs more than k points in " + what +
              " (has " + std::to_string(size) + ")");
}

/// Similarity on raw coordinate arrays; no validation.
inline double similarity_raw(std::span<const double> a, std::span<const double> b, std::size_t dim,
                             int k) {
  const auto ra = radii2(a, dim, k);
  const auto rb = radii2(b, dim, k);
  const double n = static_cast<double>(a.size() / dim);
  const double m = static_cast<double>(b.size() / dim);
  const double e1 = static_cast<double>(count_covered(b, a, ra, dim)) / m;
  const double e2 = static_cast<double>(count_covered(a, b, rb, dim)) / n;
  return 0.5 * (e1 + e2);
}

}  // namespace knn_detail

/// Distance from each point to its k-th nearest other point in the cloud.
inline std::vector<double> kth_nn_radius(const PointCloud& cloud, int k) {
  knn_detail::check_k(k, cloud.size(), "the cloud");
  auto r = knn_detail::radii2(cloud.coords(), cloud.dim(), k);
  for (double& v : r) v = std::sqrt(v);
  return r;
}

/// Mutual KNN inclusion similarity in [0, 1].
inline double similarity(const PointCloud& d, const PointCloud& d_star, const KnnConfig& cfg) {
  require(d.dim() == d_star.dim(), ErrorKind::invalid_argument,
          "point clouds differ in dimension (" + std::to_string(d.dim()) + " vs " +
              std::to_string(d_star.dim()) + ")");
  knn_detail::check_k(cfg.k, d.size(), "the first cloud");
  knn_detail::check_k(cfg.k, d_star.size(), "the second cloud");
  if (!cfg.standardize) {
    return knn_detail::similarity_raw(d.coords(), d_star.coords(), d.dim(), cfg.k);
  }
  std::vector<double> a(d.coords().begin(), d.coords().end());
  std::vector<double> b(d_star.coords().begin(), d_star.coords().end());
  knn_detail::standardize_pooled(a, b, d.dim());
  return knn_detail::similarity_raw(a, b, d.dim(), cfg.k);
}

inline double knn_distance(const PointCloud& d, const PointCloud& d_star, const KnnConfig& cfg) {
  return 1.0 - similarity(d, d_star, cfg);
}

}  // namespace ssa
