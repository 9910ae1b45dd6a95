#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssa/core/error.hpp"
#include "ssa/engine.hpp"
#include "ssa/permute.hpp"
#include "ssa/types.hpp"

/**
 * @file report.hpp
 *
 * cells.csv, contour.csv and summary.json. Numbers are written with 17
 * significant digits so every double survives a round trip.
 */

namespace ssa::io {

inline constexpr const char* kVersion = "0.1.0";

inline std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  }
  out.push_back('"');
  return out;
}

namespace report_detail {

inline const SsaCell* first_ok(const std::vector<SsaCell>& cells) {
  for (const auto& c : cells) {
    if (!c.failed) return &c;
  }
  return nullptr;
}

inline nlohmann::ordered_json eta_json(const std::vector<std::string>& axes, const SensitivityPoint& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < axes.size(); ++i) j[axes[i]] = p.values[i];
  return j;
}

inline nlohmann::ordered_json values_json(const std::vector<NamedValue>& values) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& v : values) j[v.name] = v.value;
  return j;
}

inline nlohmann::ordered_json cell_json(const std::vector<std::string>& axes, const SsaCell& c) {
  nlohmann::ordered_json j;
  j["eta"] = eta_json(axes, c.eta);
  j["estimates"] = values_json(c.fit.estimates);
  j["nuisance"] = values_json(c.fit.nuisance);
  j["mean_distance"] = c.mean_distance;
  j["asl"] = c.asl;
  return j;
}

}  // namespace report_detail

/// One row per grid point, in grid order.
inline std::string cells_csv(const std::vector<std::string>& axes, const std::vector<SsaCell>& cells) {
  const SsaCell* ref = report_detail::first_ok(cells);
  std::vector<std::string> est;
  std::vector<std::string> nui;
  if (ref != nullptr) {
    for (const auto& e : ref->fit.estimates) est.push_back(e.name);
    for (const auto& e : ref->fit.nuisance) nui.push_back(e.name);
  }
  std::string out = "index";
  for (const auto& a : axes) out += "," + a;
  for (const auto& e : est) out += "," + e;
  for (const auto& e : nui) out += "," + e;
  out += ",mean_distance,asl,plausible,converged,failed,diagnostic\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    out += std::to_string(i);
    for (double v : c.eta.values) out += "," + fmt_double(v);
    auto put = [&](const std::vector<NamedValue>& vals, std::size_t count) {
      for (std::size_t j = 0; j < count; ++j) {
        out += ",";
        if (!c.failed && j < vals.size()) out += fmt_double(vals[j].value);
      }
    };
    put(c.fit.estimates, est.size());
    put(c.fit.nuisance, nui.size());
    out += "," + (c.failed ? std::string() : fmt_double(c.mean_distance));
    out += "," + (c.failed ? std::string() : fmt_double(c.asl));
    out += c.plausible ? ",1" : ",0";
    out += !c.failed && c.fit.converged ? ",1" : ",0";
    out += c.failed ? ",1" : ",0";
    out += "," + csv_quote(c.failed ? c.diagnostic : c.fit.diagnostic);
    out += "\n";
  }
  return out;
}

/// Two-axis grids only: rows sorted by (first axis, second axis), ready for contouring.
inline std::string contour_csv(const std::vector<std::string>& axes, const std::vector<SsaCell>& cells) {
  require(axes.size() == 2, ErrorKind::invalid_argument, "contour output needs a two-axis grid");
  std::vector<const SsaCell*> order;
  for (const auto& c : cells) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(),
                   [](const SsaCell* x, const SsaCell* y) { return x->eta.values < y->eta.values; });
  std::string out = axes[0] + "," + axes[1] + ",mean_distance,asl,plausible,estimate\n";
  for (const auto* c : order) {
    out += fmt_double(c->eta.values[0]) + "," + fmt_double(c->eta.values[1]) + ",";
    out += (c->failed ? std::string() : fmt_double(c->mean_distance)) + ",";
    out += (c->failed ? std::string() : fmt_double(c->asl)) + ",";
    out += c->plausible ? "1," : "0,";
    out += c->failed || c->fit.estimates.empty() ? std::string() : fmt_double(c->fit.primary());
    out += "\n";
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// output_dir and workers do not affect results, so they are left out to keep summaries comparable.
inline nlohmann::ordered_json provenance_json(const std::map<std::string, std::string>& config, std::uint64_t seed) {
  auto echoed = config;
  echoed.erase("output_dir");
  echoed.erase("workers");
  nlohmann::ordered_json p;
  p["version"] = kVersion;
  p["seed"] = seed;
  p["config"] = echoed;
  p["generated_at"] = utc_timestamp();
  return p;
}

/*
 * Sweep summary: plausible set, estimate ranges over it, the most plausible
 * cell and the band of plausible cells within band_tol of the smallest mean
 * distance. When nothing is plausible, most_plausible is null.
 */
inline nlohmann::ordered_json sweep_summary(const std::string& model, const std::vector<std::string>& axes,
                                            const std::vector<SsaCell>& cells, double alpha, double band_tol,
                                            const nlohmann::ordered_json& provenance) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["grid"] = {{"axes", axes}, {"size", cells.size()}};
  j["alpha"] = alpha;
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.failed ? 1 : 0;
  j["cells_failed"] = failed;

  const auto plausible = plausible_set(cells, alpha);
  j["plausible_count"] = plausible.size();
  nlohmann::ordered_json set = nlohmann::ordered_json::array();
  for (const auto& c : plausible) set.push_back(report_detail::eta_json(axes, c.eta));
  j["plausible"] = set;

  nlohmann::ordered_json ranges = nlohmann::ordered_json::array();
  for (const auto& r : estimate_ranges(plausible)) ranges.push_back({{"name", r.name}, {"lo", r.lo}, {"hi", r.hi}});
  j["ranges"] = ranges;

  if (plausible.empty()) {
    j["most_plausible"] = nullptr;
    j["near_minimum_band"] = {{"tol", band_tol}, {"cells", nlohmann::ordered_json::array()}};
  } else {
    j["most_plausible"] = report_detail::cell_json(axes, most_plausible(cells));
    nlohmann::ordered_json band = nlohmann::ordered_json::array();
    for (const auto& c : near_minimum_band(cells, band_tol)) band.push_back(report_detail::cell_json(axes, c));
    j["near_minimum_band"] = {{"tol", band_tol}, {"cells", band}};
  }
  j["provenance"] = provenance;
  return j;
}

/// Writes every file or none: contents go to temporaries first and are renamed at the end.
inline void write_outputs(const std::filesystem::path& dir, const std::map<std::string, std::string>& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::config, "cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::pair<fs::path, fs::path>> staged;
  for (const auto& [name, content] : files) {
    const fs::path final_path = dir / name;
    const fs::path tmp = dir / ("." + name + ".tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      for (const auto& s : staged) fs::remove(s.first, ec);
      fs::remove(tmp, ec);
      fail(ErrorKind::config, "cannot write '" + tmp.string() + "'");
    }
    staged.emplace_back(tmp, final_path);
  }
  for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
}

}  // namespace ssa::io
