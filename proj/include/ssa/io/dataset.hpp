#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/io/csv.hpp"
#include "ssa/models/longitudinal.hpp"
#include "ssa/models/mean.hpp"
#include "ssa/models/meta.hpp"
#include "ssa/models/regression.hpp"

/**
 * @file dataset.hpp
 *
 * Typed, validated datasets from CSV.
 *
 *   meta:         y,s            s > 0
 *   mean:         x              empty x = missing
 *   longitudinal: visit_1..visit_M, empty = missing, dropout monotone
 *   regression:   t,x1,x2,x3,x4  only x2 may be empty
 */

namespace ssa::io {

enum class DatasetKind { meta, mean, longitudinal, regression };

using IncompleteDataset = std::variant<meta::MetaDataset, mean::UnivariateIncomplete, longitudinal::PanelDataset,
                                       regression::RegressionDataset>;

inline meta::MetaDataset load_meta(const CsvTable& t) {
  const auto cy = require_column(t, "y");
  const auto cs = require_column(t, "s");
  meta::MetaDataset d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double y = require_cell(t, r, cy);
    const double s = require_cell(t, r, cs);
    if (!(s > 0.0)) {
      fail(ErrorKind::invalid_data,
           "line " + std::to_string(t.line_numbers[r]) + ": standard error s must be positive, got " + t.rows[r][cs]);
    }
    d.studies.push_back({y, s});
  }
  meta::validate(d);
  return d;
}

inline mean::UnivariateIncomplete load_mean(const CsvTable& t, double lambda) {
  const auto cx = require_column(t, "x");
  mean::UnivariateIncomplete d;
  d.lambda = lambda;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (const auto v = parse_cell(t, r, cx)) {
      d.x_obs.push_back(*v);
    } else {
      ++d.n_missing;
    }
  }
  mean::validate(d);
  return d;
}

inline longitudinal::PanelDataset load_panel(const CsvTable& t) {
  std::vector<std::size_t> cols;
  for (int k = 1;; ++k) {
    const auto c = t.column("visit_" + std::to_string(k));
    if (!c) break;
    cols.push_back(*c);
  }
  require(cols.size() >= 2, ErrorKind::invalid_data, "panel needs columns visit_1 and visit_2 at least");
  require(!t.rows.empty(), ErrorKind::invalid_data, "panel has no rows");
  Eigen::MatrixXd y(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    bool dropped = false;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto v = parse_cell(t, r, cols[k]);
      if (v && dropped) {
        fail(ErrorKind::invalid_data, "line " + std::to_string(t.line_numbers[r]) +
                                          ": non-monotone dropout, visit_" + std::to_string(k + 1) +
                                          " observed after a missing visit");
      }
      if (!v && k == 0) {
        fail(ErrorKind::invalid_data, "line " + std::to_string(t.line_numbers[r]) + ": visit_1 must be observed");
      }
      dropped = dropped || !v;
      y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v ? *v : longitudinal::kMissing;
    }
  }
  return longitudinal::PanelDataset(std::move(y));
}

inline regression::RegressionDataset load_regression(const CsvTable& t) {
  const std::size_t c[5] = {require_column(t, "t"), require_column(t, "x1"), require_column(t, "x2"),
                            require_column(t, "x3"), require_column(t, "x4")};
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  require(n > 0, ErrorKind::invalid_data, "regression data has no rows");
  regression::RegressionDataset d;
  Eigen::VectorXd* cols[5] = {&d.t, &d.x1, &d.x2, &d.x3, &d.x4};
  for (auto* v : cols) v->resize(n);
  d.missing.assign(t.rows.size(), false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < 5; ++j) {
      if (j == 2) {
        const auto v = parse_cell(t, r, c[j]);
        d.missing[r] = !v;
        (*cols[j])(i) = v ? *v : longitudinal::kMissing;
      } else {
        (*cols[j])(i) = require_cell(t, r, c[j]);
      }
    }
  }
  regression::validate(d);
  return d;
}

/// Reads and schema-checks a dataset file. Every violation is an invalid_data error naming the offending line.
inline IncompleteDataset validate_dataset(const std::string& path, DatasetKind kind, double lambda = 0.0) {
  const auto table = read_csv(path);
  switch (kind) {
    case DatasetKind::meta:
      return load_meta(table);
    case DatasetKind::mean:
      return load_mean(table, lambda);
    case DatasetKind::longitudinal:
      return load_panel(table);
    case DatasetKind::regression:
      return load_regression(table);
  }
  fail(ErrorKind::invalid_argument, "unknown dataset kind");
}

}  // namespace ssa::io
