#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssa/core/error.hpp"
#include "ssa/engine.hpp"
#include "ssa/io/config.hpp"
#include "ssa/io/dataset.hpp"
#include "ssa/io/report.hpp"
#include "ssa/models/longitudinal.hpp"
#include "ssa/models/mean.hpp"
#include "ssa/models/meta.hpp"
#include "ssa/models/regression.hpp"

/**
 * @file cli.hpp
 *
 * Command-line driver. Exit codes:
 *   0  success
 *   1  run failed for another reason (for example every grid point failed)
 *   2  configuration error
 *   3  data error (missing, unreadable or malformed data file)
 *   4  no plausible model (outputs are still written)
 */

namespace ssa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNoPlausible = 4;

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
      return kExitConfig;
    case ErrorKind::invalid_data:
    case ErrorKind::insufficient_data:
      return kExitData;
    case ErrorKind::no_plausible_model:
      return kExitNoPlausible;
    default:
      return kExitRunFailure;
  }
}

struct RunOutput {
  std::map<std::string, std::string> files;
  bool plausible_found = true;
  std::string headline;
};

inline SsaConfig engine_config(const io::RunConfig& cfg) {
  SsaConfig s;
  s.mc_size = cfg.mc_size;
  s.knn.k = cfg.k;
  s.knn.standardize = cfg.standardize;
  s.perm.n_perm = cfg.n_perm;
  s.perm.mode = cfg.perm_mode;
  s.alpha = cfg.alpha;
  s.seed = cfg.seed;
  s.workers = cfg.workers;
  return s;
}

template <SensitivityModel M>
RunOutput sweep_outputs(const M& model, const typename M::data_type& data, const io::RunConfig& cfg) {
  const auto grid = cfg.make_grid();
  const auto cells = run_sweep(model, data, grid, engine_config(cfg));
  RunOutput out;
  out.files["cells.csv"] = io::cells_csv(grid.axes(), cells);
  if (grid.axes().size() == 2) out.files["contour.csv"] = io::contour_csv(grid.axes(), cells);
  const auto summary = io::sweep_summary(io::to_string(cfg.model), grid.axes(), cells, cfg.alpha, cfg.band_tol,
                                         io::provenance_json(cfg.resolved, cfg.seed));
  out.files["summary.json"] = summary.dump(2) + "\n";
  out.plausible_found = !summary["most_plausible"].is_null();
  if (out.plausible_found) {
    const auto& best = summary["most_plausible"];
    out.headline = "most plausible " + best["eta"].dump() + " estimates " + best["estimates"].dump() + "; " +
                   std::to_string(summary["plausible_count"].template get<std::size_t>()) + " of " +
                   std::to_string(cells.size()) + " grid points plausible";
  } else {
    out.headline = "no plausible model: every candidate was rejected at alpha " + io::fmt_double(cfg.alpha);
  }
  return out;
}

inline RunOutput mean_study_outputs(const io::RunConfig& cfg) {
  mean::MeanStudyConfig sc;
  sc.n = cfg.study_n;
  sc.mu = cfg.study_mu;
  sc.sigma2 = cfg.study_sigma2;
  sc.eta = cfg.study_eta;
  sc.lambda = cfg.lambda;
  sc.eta_grid = cfg.grid.front().values();
  sc.replications = cfg.replications > 0 ? cfg.replications : 500;
  sc.scheme = cfg.imputation;
  const auto report = mean::run_mean_study(sc, engine_config(cfg));

  std::string rows = "replication,n_observed,complete_case_mean,has_plausible,selected_eta,mu_hat,range_lo,range_hi,covered\n";
  for (const auto& r : report.rows) {
    rows += std::to_string(r.replication) + "," + std::to_string(r.n_observed) + "," +
            io::fmt_double(r.complete_case_mean) + "," + (r.has_plausible ? "1" : "0") + ",";
    if (r.has_plausible) {
      rows += io::fmt_double(r.selected_eta) + "," + io::fmt_double(r.mu_hat) + "," + io::fmt_double(r.range_lo) +
              "," + io::fmt_double(r.range_hi) + ",";
    } else {
      rows += ",,,,";
    }
    rows += r.covered ? "1\n" : "0\n";
  }
  nlohmann::ordered_json j;
  j["model"] = "mean-study";
  j["replications"] = report.rows.size();
  j["with_plausible"] = report.with_plausible;
  j["avg_mu_hat"] = report.avg_mu_hat;
  j["sd_mu_hat"] = report.sd_mu_hat;
  j["avg_selected_eta"] = report.avg_selected_eta;
  j["sd_selected_eta"] = report.sd_selected_eta;
  j["coverage"] = report.coverage;
  j["avg_complete_case_mean"] = report.avg_complete_case_mean;
  j["provenance"] = io::provenance_json(cfg.resolved, cfg.seed);

  RunOutput out;
  out.files["replications.csv"] = rows;
  out.files["summary.json"] = j.dump(2) + "\n";
  out.plausible_found = report.with_plausible > 0;
  out.headline = "average mu_hat " + io::fmt_double(report.avg_mu_hat) + ", average selected eta " +
                 io::fmt_double(report.avg_selected_eta) + ", coverage " + io::fmt_double(report.coverage);
  return out;
}

inline RunOutput regression_study_outputs(const io::RunConfig& cfg) {
  regression::RegressionStudyConfig sc;
  sc.eta_grid = cfg.grid.front().values();
  sc.replications = cfg.replications > 0 ? cfg.replications : 100;
  const auto report = regression::run_regression_study(sc, engine_config(cfg));

  auto vec = [](const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    return out;
  };
  std::string rows = "replication,n_missing,has_plausible,selected_eta";
  for (int j = 0; j < 5; ++j) rows += ",theta_complete_" + std::to_string(j);
  for (int j = 0; j < 5; ++j) rows += ",theta_ssa_" + std::to_string(j);
  for (int j = 0; j < 5; ++j) rows += ",se_ssa_" + std::to_string(j);
  rows += "\n";
  for (const auto& r : report.rows) {
    rows += std::to_string(r.replication) + "," + std::to_string(r.n_missing) + "," + (r.has_plausible ? "1" : "0") +
            "," + (r.has_plausible ? io::fmt_double(r.selected_eta) : std::string());
    for (int j = 0; j < 5; ++j) rows += "," + io::fmt_double(r.theta_complete(j));
    for (int j = 0; j < 5; ++j) rows += "," + (r.has_plausible ? io::fmt_double(r.theta_ssa(j)) : std::string());
    for (int j = 0; j < 5; ++j) rows += "," + (r.has_plausible ? io::fmt_double(r.se_ssa(j)) : std::string());
    rows += "\n";
  }
  nlohmann::ordered_json j;
  j["model"] = "regression-study";
  j["replications"] = report.rows.size();
  j["with_plausible"] = report.with_plausible;
  j["avg_theta_complete"] = vec(report.avg_theta_complete);
  j["avg_theta_ssa"] = vec(report.avg_theta_ssa);
  j["sd_theta_ssa_across_replications"] = vec(report.sd_theta_ssa);
  j["avg_model_se_theta_ssa"] = vec(report.avg_model_se_ssa);
  j["avg_selected_eta"] = report.avg_selected_eta;
  j["provenance"] = io::provenance_json(cfg.resolved, cfg.seed);

  RunOutput out;
  out.files["replications.csv"] = rows;
  out.files["summary.json"] = j.dump(2) + "\n";
  out.plausible_found = report.with_plausible > 0;
  out.headline = "average most plausible theta " + nlohmann::json(vec(report.avg_theta_ssa)).dump();
  return out;
}

/// Loads the data (exit 3 territory) and runs the configured sweep or study.
inline RunOutput execute(const io::RunConfig& cfg) {
  switch (cfg.model) {
    case io::ModelKind::meta: {
      const auto data = std::get<meta::MetaDataset>(io::validate_dataset(cfg.data_path, io::DatasetKind::meta));
      return sweep_outputs(meta::CopasModel{}, data, cfg);
    }
    case io::ModelKind::mean: {
      const auto data = std::get<mean::UnivariateIncomplete>(
          io::validate_dataset(cfg.data_path, io::DatasetKind::mean, cfg.lambda));
      return sweep_outputs(mean::MeanModel(cfg.imputation), data, cfg);
    }
    case io::ModelKind::longitudinal: {
      const auto data =
          std::get<longitudinal::PanelDataset>(io::validate_dataset(cfg.data_path, io::DatasetKind::longitudinal));
      const auto needed = static_cast<std::size_t>(data.visits() - 1);
      if (!(cfg.grid.size() == 1 && cfg.grid[0].name == "eta") && cfg.grid.size() != needed) {
        fail(ErrorKind::config, "panel has " + std::to_string(data.visits()) + " visits, so per-visit grids need " +
                                    std::to_string(needed) + " axes (eta_2 .. eta_" +
                                    std::to_string(data.visits()) + ")");
      }
      return sweep_outputs(longitudinal::DropoutModel{}, data, cfg);
    }
    case io::ModelKind::regression: {
      const auto data = std::get<regression::RegressionDataset>(
          io::validate_dataset(cfg.data_path, io::DatasetKind::regression));
      return sweep_outputs(regression::RegressionModel{}, data, cfg);
    }
    case io::ModelKind::mean_study:
      return mean_study_outputs(cfg);
    case io::ModelKind::regression_study:
      return regression_study_outputs(cfg);
  }
  fail(ErrorKind::config, "unknown model");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation-based sensitivity analysis for non-ignorable missing data"};
  app.set_version_flag("--version", std::string(io::kVersion));

  std::string config_path;
  std::vector<std::string> grid_specs;
  std::map<std::string, std::string> flags;
  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("--grid", grid_specs, "grid axis as name=lo:hi:steps (repeatable)");
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  static const Flag kFlags[] = {
      {"--model", "model", "meta, mean, longitudinal, regression, mean-study or regression-study"},
      {"--data", "data", "input CSV"},
      {"--output-dir", "output_dir", "directory for cells.csv, summary.json, ... (default $SSA_OUTPUT_DIR or ssa_output)"},
      {"--k", "k", "neighbours in the KNN distance"},
      {"--mc-size", "mc_size", "Monte Carlo replicates per grid point"},
      {"--n-perm", "n_perm", "permutation draws for the ASL"},
      {"--alpha", "alpha", "significance level for the plausible set"},
      {"--seed", "seed", "master seed"},
      {"--workers", "workers", "worker threads"},
      {"--perm-mode", "perm_mode", "pooled or internal"},
      {"--standardize", "standardize", "z-score the pooled clouds before KNN (true/false)"},
      {"--band-tol", "band_tol", "width of the near-minimum band"},
      {"--lambda", "lambda", "known offset of the mean model"},
      {"--imputation", "imputation", "mean model: normal, resample or smoothed"},
      {"--replications", "replications", "replications for the simulation studies"},
      {"--study-n", "study.n", "mean study sample size"},
      {"--study-mu", "study.mu", "mean study true mean"},
      {"--study-sigma2", "study.sigma2", "mean study true variance"},
      {"--study-eta", "study.eta", "mean study true eta"},
  };
  std::map<std::string, std::string> raw;
  for (const auto& f : kFlags) app.add_option(f.name, raw[f.key], f.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << io::kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& f : kFlags) {
    if (app.get_option(f.name)->count() > 0) flags[f.key] = raw[f.key];
  }
  for (const auto& g : grid_specs) {
    const auto eq = g.find('=');
    if (eq == std::string::npos || eq == 0) {
      err << "error: --grid expects name=lo:hi:steps, got '" << g << "'\n";
      return kExitConfig;
    }
    flags["grid." + g.substr(0, eq)] = g.substr(eq + 1);
  }

  try {
    io::ConfigMap file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) fail(ErrorKind::config, "cannot open config file '" + config_path + "'");
      file = io::parse_config(in);
    }
    // flag grids replace file grids entirely
    bool flag_grid = false;
    for (const auto& [k, v] : flags) flag_grid = flag_grid || k.rfind("grid.", 0) == 0;
    if (flag_grid) std::erase_if(file, [](const auto& kv) { return kv.first.rfind("grid.", 0) == 0; });

    auto cfg = io::resolve_config(file, flags);
    if (cfg.output_dir.empty()) {
      const char* env = std::getenv("SSA_OUTPUT_DIR");
      cfg.output_dir = env != nullptr && *env != '\0' ? env : "ssa_output";
    }
    const auto result = execute(cfg);
    io::write_outputs(cfg.output_dir, result.files);
    out << result.headline << "\n";
    out << "outputs written to " << cfg.output_dir << "\n";
    if (!result.plausible_found) {
      err << "no plausible model\n";
      return kExitNoPlausible;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
}

}  // namespace ssa::cli
