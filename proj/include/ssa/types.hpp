#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/core/rng.hpp"

namespace ssa {

/// One candidate value of the sensitivity parameter; may be vector-valued.
struct SensitivityPoint {
  std::vector<double> values;

  std::uint64_t key() const { return hash_values(values); }
  double operator[](std::size_t i) const { return values.at(i); }
  friend auto operator<=>(const SensitivityPoint&, const SensitivityPoint&) = default;
};

/// Finite sweep set, with axis names such as {"a", "b"} or {"eta"}.
class SensitivityGrid {
 public:
  SensitivityGrid(std::vector<std::string> axes, std::vector<SensitivityPoint> points)
      : axes_(std::move(axes)), points_(std::move(points)) {
    require(!axes_.empty(), ErrorKind::invalid_argument, "sensitivity grid needs at least one axis");
    require(!points_.empty(), ErrorKind::invalid_argument, "sensitivity grid is empty");
    std::set<std::vector<double>> seen;
    for (const auto& p : points_) {
      require(p.values.size() == axes_.size(), ErrorKind::invalid_argument,
              "grid point dimension does not match the axes");
      for (double v : p.values) {
        require(std::isfinite(v), ErrorKind::invalid_argument, "non-finite grid coordinate");
      }
      require(seen.insert(p.values).second, ErrorKind::invalid_argument, "duplicate grid point");
    }
  }

  /// `steps` equispaced points on [lo, hi], endpoints included.
  static std::vector<double> linspace(double lo, double hi, int steps) {
    require(steps >= 1, ErrorKind::invalid_argument, "grid axis needs at least one step");
    if (steps == 1) return {lo};
    std::vector<double> out(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (steps - 1);
    }
    out.back() = hi;
    return out;
  }

  /// Cartesian product; the last axis varies fastest.
  static SensitivityGrid cartesian(std::vector<std::string> axes,
                                   const std::vector<std::vector<double>>& values) {
    require(axes.size() == values.size(), ErrorKind::invalid_argument,
            "axis names and value lists differ in length");
    std::vector<SensitivityPoint> points{SensitivityPoint{}};
    for (const auto& axis : values) {
      std::vector<SensitivityPoint> next;
      next.reserve(points.size() * axis.size());
      for (const auto& p : points) {
        for (double v : axis) {
          auto q = p;
          q.values.push_back(v);
          next.push_back(std::move(q));
        }
      }
      points = std::move(next);
    }
    return SensitivityGrid(std::move(axes), std::move(points));
  }

  const std::vector<std::string>& axes() const noexcept { return axes_; }
  const std::vector<SensitivityPoint>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<std::string> axes_;
  std::vector<SensitivityPoint> points_;
};

struct NamedValue {
  std::string name;
  double value = 0.0;
};

/// Model-agnostic summary of a fit at one grid point.
struct FitResult {
  std::vector<NamedValue> estimates;  // first entry is the parameter of interest
  std::vector<NamedValue> nuisance;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
  int iterations = 0;
  std::string diagnostic;

  double primary() const {
    require(!estimates.empty(), ErrorKind::invalid_argument, "fit has no estimates");
    return estimates.front().value;
  }
};

struct SsaCell {
  SensitivityPoint eta;
  FitResult fit;
  double mean_distance = std::numeric_limits<double>::quiet_NaN();
  double asl = std::numeric_limits<double>::quiet_NaN();
  bool plausible = false;
  bool failed = false;
  std::string diagnostic;  // why the cell failed
};

}  // namespace ssa
