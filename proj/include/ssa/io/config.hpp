#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssa/core/error.hpp"
#include "ssa/models/mean.hpp"
#include "ssa/permute.hpp"
#include "ssa/types.hpp"

/**
 * @file config.hpp
 *
 * Run configuration. The file format is flat `key = value` lines, `#` starts a
 * comment. Grid axes are given as `grid.<axis> = lo:hi:steps` (both ends
 * included). Command-line flags are folded into the same key space and win
 * over the file.
 */

namespace ssa::io {

enum class ModelKind { meta, mean, longitudinal, regression, mean_study, regression_study };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::meta: return "meta";
    case ModelKind::mean: return "mean";
    case ModelKind::longitudinal: return "longitudinal";
    case ModelKind::regression: return "regression";
    case ModelKind::mean_study: return "mean-study";
    case ModelKind::regression_study: return "regression-study";
  }
  return "unknown";
}

inline bool needs_data(ModelKind m) { return m != ModelKind::mean_study && m != ModelKind::regression_study; }

struct AxisSpec {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  int steps = 1;

  std::vector<double> values() const { return SensitivityGrid::linspace(lo, hi, steps); }
};

struct RunConfig {
  ModelKind model = ModelKind::mean;
  std::string data_path;
  std::vector<AxisSpec> grid;
  int k = 2;
  int mc_size = 100;
  int n_perm = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_dir;
  PermutationMode perm_mode = PermutationMode::pooled;
  bool standardize = true;
  double band_tol = 0.01;
  // mean model
  double lambda = 0.0;
  mean::Imputation imputation = mean::Imputation::tilted_resample;
  // simulation studies
  int replications = 0;  // 0 picks the study default
  std::size_t study_n = 100;
  double study_mu = 0.0;
  double study_sigma2 = 1.0;
  double study_eta = -1.0;

  std::map<std::string, std::string> resolved;  // every effective key, echoed into provenance

  SensitivityGrid make_grid() const {
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;
    for (const auto& a : grid) {
      names.push_back(a.name);
      values.push_back(a.values());
    }
    return SensitivityGrid::cartesian(names, values);
  }
};

using ConfigMap = std::map<std::string, std::string>;

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void bad(const std::string& key, const std::string& value, const std::string& why) {
  fail(ErrorKind::config, "config key '" + key + "' = '" + value + "': " + why);
}

inline double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    bad(key, s, "expected a finite number");
  }
  return v;
}

inline long long to_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad(key, s, "expected an integer");
  return v;
}

inline AxisSpec to_axis(const std::string& key, const std::string& value) {
  AxisSpec a;
  a.name = key.substr(5);
  if (a.name.empty()) bad(key, value, "grid axis needs a name");
  const auto p1 = value.find(':');
  const auto p2 = p1 == std::string::npos ? std::string::npos : value.find(':', p1 + 1);
  if (p2 == std::string::npos) bad(key, value, "expected lo:hi:steps");
  a.lo = to_double(key, trim(value.substr(0, p1)));
  a.hi = to_double(key, trim(value.substr(p1 + 1, p2 - p1 - 1)));
  const auto steps = to_int(key, trim(value.substr(p2 + 1)));
  if (steps < 1 || steps > 100000) bad(key, value, "steps must lie in [1, 100000]");
  if (steps > 1 && !(a.lo < a.hi)) bad(key, value, "lo must be below hi");
  a.steps = static_cast<int>(steps);
  return a;
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "model",     "data",      "output_dir", "k",         "mc_size",      "n_perm",   "alpha",
      "seed",      "workers",   "perm_mode",  "standardize", "band_tol",   "lambda",   "imputation",
      "replications", "study.n", "study.mu",  "study.sigma2", "study.eta"};
  return keys;
}

}  // namespace config_detail

/// Parses `key = value` lines. Malformed lines and repeated keys are config errors.
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = config_detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::config, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = config_detail::trim(body.substr(0, eq));
    const std::string value = config_detail::trim(body.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::config, "config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      fail(ErrorKind::config, "config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
  }
  return out;
}

inline ConfigMap parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline std::vector<AxisSpec> default_grid(ModelKind m) {
  switch (m) {
    case ModelKind::meta:
      return {{"a", -3.0, 0.0, 31}, {"b", 0.1, 2.0, 20}};
    case ModelKind::mean:
    case ModelKind::mean_study:
      return {{"eta", -5.0, 5.0, 101}};
    case ModelKind::longitudinal:
      return {{"eta", -0.2, 0.2, 41}};
    case ModelKind::regression:
    case ModelKind::regression_study:
      return {{"eta", -5.0, 5.0, 51}};
  }
  return {};
}

/// Turns the merged key space into a checked RunConfig. `overrides` win over `file`.
inline RunConfig resolve_config(const ConfigMap& file, const ConfigMap& overrides = {}) {
  using namespace config_detail;
  ConfigMap m = file;
  for (const auto& [k, v] : overrides) m[k] = v;

  RunConfig cfg;
  const auto& keys = known_keys();
  for (const auto& [key, value] : m) {
    if (key.rfind("grid.", 0) == 0) continue;
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) bad(key, value, "unknown key");
  }

  const auto it = m.find("model");
  if (it == m.end()) fail(ErrorKind::config, "config key 'model' is required");
  const std::string& model = it->second;
  if (model == "meta") cfg.model = ModelKind::meta;
  else if (model == "mean") cfg.model = ModelKind::mean;
  else if (model == "longitudinal") cfg.model = ModelKind::longitudinal;
  else if (model == "regression") cfg.model = ModelKind::regression;
  else if (model == "mean-study") cfg.model = ModelKind::mean_study;
  else if (model == "regression-study") cfg.model = ModelKind::regression_study;
  else bad("model", model, "expected meta, mean, longitudinal, regression, mean-study or regression-study");

  auto get = [&](const std::string& key) -> const std::string* {
    const auto f = m.find(key);
    return f == m.end() ? nullptr : &f->second;
  };
  if (auto v = get("data")) cfg.data_path = *v;
  if (auto v = get("output_dir")) cfg.output_dir = *v;
  if (auto v = get("k")) {
    const auto k = to_int("k", *v);
    if (k < 1 || k > 1000) bad("k", *v, "must lie in [1, 1000]");
    cfg.k = static_cast<int>(k);
  }
  if (auto v = get("mc_size")) {
    const auto n = to_int("mc_size", *v);
    if (n < 1 || n > 1000000) bad("mc_size", *v, "must lie in [1, 1000000]");
    cfg.mc_size = static_cast<int>(n);
  }
  if (auto v = get("n_perm")) {
    const auto n = to_int("n_perm", *v);
    if (n < 1 || n > 10000000) bad("n_perm", *v, "must lie in [1, 10000000]");
    cfg.n_perm = static_cast<int>(n);
  }
  if (auto v = get("alpha")) {
    cfg.alpha = to_double("alpha", *v);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) bad("alpha", *v, "must lie in (0, 1)");
  }
  if (auto v = get("seed")) {
    std::uint64_t s = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), s);
    if (v->empty() || ec != std::errc() || ptr != v->data() + v->size()) bad("seed", *v, "expected an unsigned integer");
    cfg.seed = s;
  }
  if (auto v = get("workers")) {
    const auto w = to_int("workers", *v);
    if (w < 1 || w > 1024) bad("workers", *v, "must lie in [1, 1024]");
    cfg.workers = static_cast<unsigned>(w);
  }
  if (auto v = get("perm_mode")) {
    if (*v == "pooled") cfg.perm_mode = PermutationMode::pooled;
    else if (*v == "internal") cfg.perm_mode = PermutationMode::internal;
    else bad("perm_mode", *v, "expected pooled or internal");
  }
  if (auto v = get("standardize")) {
    if (*v == "true" || *v == "1") cfg.standardize = true;
    else if (*v == "false" || *v == "0") cfg.standardize = false;
    else bad("standardize", *v, "expected true or false");
  }
  if (auto v = get("band_tol")) {
    cfg.band_tol = to_double("band_tol", *v);
    if (cfg.band_tol < 0.0) bad("band_tol", *v, "must be nonnegative");
  }
  if (auto v = get("lambda")) cfg.lambda = to_double("lambda", *v);
  if (auto v = get("imputation")) {
    if (*v == "normal") cfg.imputation = mean::Imputation::tilted_normal;
    else if (*v == "resample") cfg.imputation = mean::Imputation::tilted_resample;
    else if (*v == "smoothed") cfg.imputation = mean::Imputation::tilted_smoothed;
    else bad("imputation", *v, "expected normal, resample or smoothed");
  }
  if (auto v = get("replications")) {
    const auto r = to_int("replications", *v);
    if (r < 1 || r > 1000000) bad("replications", *v, "must lie in [1, 1000000]");
    cfg.replications = static_cast<int>(r);
  }
  if (auto v = get("study.n")) {
    const auto n = to_int("study.n", *v);
    if (n < 2 || n > 100000000) bad("study.n", *v, "must lie in [2, 1e8]");
    cfg.study_n = static_cast<std::size_t>(n);
  }
  if (auto v = get("study.mu")) cfg.study_mu = to_double("study.mu", *v);
  if (auto v = get("study.sigma2")) {
    cfg.study_sigma2 = to_double("study.sigma2", *v);
    if (!(cfg.study_sigma2 > 0.0)) bad("study.sigma2", *v, "must be positive");
  }
  if (auto v = get("study.eta")) cfg.study_eta = to_double("study.eta", *v);

  for (const auto& [key, value] : m) {
    if (key.rfind("grid.", 0) == 0) cfg.grid.push_back(to_axis(key, value));
  }
  if (cfg.grid.empty()) {
    cfg.grid = default_grid(cfg.model);
    for (const auto& a : cfg.grid) {
      m["grid." + a.name] = std::to_string(a.lo) + ":" + std::to_string(a.hi) + ":" + std::to_string(a.steps);
    }
  }

  if (cfg.model == ModelKind::meta) {
    // ConfigMap is ordered, so grid axes arrive sorted by name: a before b.
    if (cfg.grid.size() != 2 || cfg.grid[0].name != "a" || cfg.grid[1].name != "b") {
      fail(ErrorKind::config, "meta model needs exactly the grid axes grid.a and grid.b");
    }
  } else if (cfg.model == ModelKind::longitudinal) {
    const bool shared = cfg.grid.size() == 1 && cfg.grid[0].name == "eta";
    bool per_visit = true;
    for (const auto& a : cfg.grid) {
      const std::string tail = a.name.rfind("eta_", 0) == 0 ? a.name.substr(4) : std::string();
      per_visit = per_visit && !tail.empty() && tail.size() < 6 &&
                  std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; });
    }
    if (!shared && !per_visit) {
      fail(ErrorKind::config, "longitudinal model needs grid.eta or per-visit axes grid.eta_2 .. grid.eta_M");
    }
    if (per_visit && !shared) {
      // order axes by visit number, not lexicographically
      std::sort(cfg.grid.begin(), cfg.grid.end(), [](const AxisSpec& x, const AxisSpec& y) {
        return std::stoi(x.name.substr(4)) < std::stoi(y.name.substr(4));
      });
      for (std::size_t j = 0; j < cfg.grid.size(); ++j) {
        if (cfg.grid[j].name != "eta_" + std::to_string(j + 2)) {
          fail(ErrorKind::config, "per-visit grid axes must be eta_2, eta_3, ... without gaps");
        }
      }
    }
  } else if (cfg.grid.size() != 1 || cfg.grid[0].name != "eta") {
    fail(ErrorKind::config, std::string(to_string(cfg.model)) + " model needs exactly one grid axis, grid.eta");
  }

  if (needs_data(cfg.model) && cfg.data_path.empty()) {
    fail(ErrorKind::config, std::string(to_string(cfg.model)) + " model needs a data file (key 'data')");
  }
  if (cfg.perm_mode == PermutationMode::internal && cfg.mc_size < 2) {
    fail(ErrorKind::config, "perm_mode internal needs mc_size of at least 2");
  }
  cfg.resolved = std::move(m);
  return cfg;
}

}  // namespace ssa::io
