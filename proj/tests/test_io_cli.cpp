#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "ssa/cli.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ssa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssa_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = ssa::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path meta_csv(const fs::path& dir) {
  ssa::Rng rng(3);
  ssa::meta::MetaFit truth;
  truth.mu = 0.2;
  truth.tau2 = 0.02;
  truth.rho = 0.6;
  const auto d = ssa::meta::simulate_selected(truth, -1.0, 0.3, {0.1, 0.2, 0.3, 0.5, 0.7}, 30, rng);
  std::string text = "study,y,s\n";
  for (std::size_t i = 0; i < d.studies.size(); ++i) {
    text += "s" + std::to_string(i) + "," + ssa::io::fmt_double(d.studies[i].y) + "," +
            ssa::io::fmt_double(d.studies[i].s) + "\n";
  }
  const auto p = dir / "meta.csv";
  write_file(p, text);
  return p;
}

std::string strip_timestamp(const std::string& json) {
  return std::regex_replace(json, std::regex("\"generated_at\": \"[^\"]*\""), "\"generated_at\": \"\"");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> small_meta_args(const fs::path& data, const fs::path& out_dir) {
  return {"--model", "meta",          "--data",    data.string(), "--output-dir", out_dir.string(),
          "--grid",  "a=-1.5:0:4",    "--grid",    "b=0.2:1:3",   "--mc-size",    "4",
          "--n-perm", "60",           "--seed",    "11"};
}

}  // namespace

TEST(Csv, QuotesBomAndBlankLines) {
  std::istringstream in("\xEF\xBB\xBFname,y,s\n\n\"a, b\",0.5,0.1\n\"say \"\"hi\"\"\",1e-1,2\n");
  const auto t = ssa::io::parse_csv(in);
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[0], "name");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a, b");
  EXPECT_EQ(t.rows[1][0], "say \"hi\"");
  EXPECT_EQ(t.line_numbers[0], 3u);
  EXPECT_EQ(*ssa::io::parse_cell(t, 1, 1), 0.1);
}

TEST(Csv, FieldCountMismatchNamesLine) {
  std::istringstream in("y,s\n1,2\n3\n");
  try {
    ssa::io::parse_csv(in);
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::invalid_data);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Dataset, MetaZeroStandardErrorNamesRow) {
  TempDir tmp;
  write_file(tmp.path() / "m.csv", "y,s\n0.1,0.2\n0.3,0\n0.2,0.1\n");
  try {
    ssa::io::validate_dataset((tmp.path() / "m.csv").string(), ssa::io::DatasetKind::meta);
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::invalid_data);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Dataset, PanelReappearingSubjectRejected) {
  TempDir tmp;
  write_file(tmp.path() / "p.csv", "visit_1,visit_2,visit_3\n1,2,3\n1,,3\n");
  try {
    ssa::io::validate_dataset((tmp.path() / "p.csv").string(), ssa::io::DatasetKind::longitudinal);
    FAIL();
  } catch (const ssa::Error& e) {
    EXPECT_EQ(e.kind(), ssa::ErrorKind::invalid_data);
  }
}

TEST(Dataset, FuelSchemaMaskFromEmptyCells) {
  TempDir tmp;
  write_file(tmp.path() / "f.csv", "t,x1,x2,x3,x4\n500,15,30,900,20\n520,16,,910,21\n480,14,25,880,19\n");
  const auto d = std::get<ssa::regression::RegressionDataset>(
      ssa::io::validate_dataset((tmp.path() / "f.csv").string(), ssa::io::DatasetKind::regression));
  EXPECT_EQ(d.missing, (std::vector<bool>{false, true, false}));
  EXPECT_EQ(d.x2(2), 25.0);
  write_file(tmp.path() / "g.csv", "t,x1,x2,x3,x4\n500,,30,900,20\n");
  EXPECT_THROW(ssa::io::validate_dataset((tmp.path() / "g.csv").string(), ssa::io::DatasetKind::regression),
               ssa::Error);
}

TEST(Config, ParsingAndResolution) {
  const auto m = ssa::io::parse_config_text("# comment\nmodel = meta\ndata = x.csv  # inline\ngrid.b = 0.1:2:20\ngrid.a = -3:0:31\n");
  const auto cfg = ssa::io::resolve_config(m, {{"k", "3"}});
  EXPECT_EQ(cfg.model, ssa::io::ModelKind::meta);
  EXPECT_EQ(cfg.k, 3);
  ASSERT_EQ(cfg.grid.size(), 2u);
  EXPECT_EQ(cfg.make_grid().size(), 620u);
  EXPECT_THROW(ssa::io::parse_config_text("k = 1\nk = 2\n"), ssa::Error);
  EXPECT_THROW(ssa::io::parse_config_text("just words\n"), ssa::Error);
  EXPECT_THROW(ssa::io::resolve_config({{"model", "mean"}, {"data", "x"}, {"colour", "red"}}), ssa::Error);
  EXPECT_THROW(ssa::io::resolve_config({{"model", "meta"}, {"data", "x"}, {"grid.eta", "0:1:3"}}), ssa::Error);
  EXPECT_THROW(ssa::io::resolve_config({{"model", "mean"}}), ssa::Error);
  EXPECT_THROW(ssa::io::resolve_config({{"model", "mean"}, {"data", "x"}, {"alpha", "1.5"}}), ssa::Error);
  const auto lg = ssa::io::resolve_config(
      {{"model", "longitudinal"}, {"data", "x"}, {"grid.eta_10", "0:0:1"}, {"grid.eta_2", "0:0:1"},
       {"grid.eta_3", "0:0:1"}, {"grid.eta_4", "0:0:1"}, {"grid.eta_5", "0:0:1"}, {"grid.eta_6", "0:0:1"},
       {"grid.eta_7", "0:0:1"}, {"grid.eta_8", "0:0:1"}, {"grid.eta_9", "0:0:1"}});
  EXPECT_EQ(lg.grid.back().name, "eta_10");
  EXPECT_THROW(ssa::io::resolve_config({{"model", "longitudinal"}, {"data", "x"}, {"grid.eta_x", "0:0:1"}}),
               ssa::Error);
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  const auto out_dir = tmp.path() / "out";
  // missing data file: exit 3 and nothing written
  auto r = run({"--model", "mean", "--data", (tmp.path() / "nope.csv").string(), "--output-dir", out_dir.string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_FALSE(fs::exists(out_dir));
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);

  r = run({"--model", "mean", "--data", "x.csv", "--alpha", "2"});
  EXPECT_EQ(r.code, 2);
  r = run({"--no-such-flag"});
  EXPECT_EQ(r.code, 2);
  r = run({"--model", "meta", "--data", "x.csv", "--grid", "eta=0:1:3"});
  EXPECT_EQ(r.code, 2);

  // almost nothing can clear alpha = 0.999: exit 4, outputs still written
  write_file(tmp.path() / "x.csv", "x\n0.1\n0.5\n-0.3\n1.2\nNA\n0.8\n-1.1\n2.0\n0.0\n0.4\n-0.6\n1.5\n0.9\nNA\n");
  r = run({"--model", "mean", "--data", (tmp.path() / "x.csv").string(), "--output-dir", out_dir.string(),
           "--grid", "eta=4:5:2", "--alpha", "0.999", "--mc-size", "5", "--n-perm", "50"});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_TRUE(fs::exists(out_dir / "summary.json"));
  EXPECT_NE(read_file(out_dir / "summary.json").find("\"most_plausible\": null"), std::string::npos);
}

TEST(Cli, MetaSweepOutputs) {
  TempDir tmp;
  const auto data = meta_csv(tmp.path());
  const auto out_dir = tmp.path() / "run";
  const auto r = run(small_meta_args(data, out_dir));
  ASSERT_TRUE(r.code == 0 || r.code == 4) << r.err;
  const auto cells = read_file(out_dir / "cells.csv");
  std::stringstream ss(cells);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line.rfind("index,a,b,mu,tau2,rho,mean_distance,asl,plausible", 0), 0u) << line;
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 12);
  EXPECT_TRUE(fs::exists(out_dir / "contour.csv"));
  const auto summary = nlohmann::json::parse(read_file(out_dir / "summary.json"));
  EXPECT_EQ(summary["grid"]["size"], 12);
  EXPECT_EQ(summary["provenance"]["seed"], 11);
}

TEST(Cli, DeterministicAndWorkerIndependent) {
  TempDir tmp;
  const auto data = meta_csv(tmp.path());
  const auto a = tmp.path() / "a";
  const auto b = tmp.path() / "b";
  const auto c = tmp.path() / "c";
  auto args = small_meta_args(data, a);
  ASSERT_NE(run(args).code, 1);
  args = small_meta_args(data, b);
  ASSERT_NE(run(args).code, 1);
  args = small_meta_args(data, c);
  args.insert(args.end(), {"--workers", "8"});
  ASSERT_NE(run(args).code, 1);
  for (const auto& dir : {b, c}) {
    EXPECT_EQ(read_file(a / "cells.csv"), read_file(dir / "cells.csv"));
    EXPECT_EQ(read_file(a / "contour.csv"), read_file(dir / "contour.csv"));
    EXPECT_EQ(strip_timestamp(read_file(a / "summary.json")), strip_timestamp(read_file(dir / "summary.json")));
  }
}

TEST(Cli, RangesRecomputableFromCellsCsv) {
  TempDir tmp;
  const auto data = meta_csv(tmp.path());
  const auto out_dir = tmp.path() / "run";
  auto args = small_meta_args(data, out_dir);
  args.insert(args.end(), {"--alpha", "0.01"});
  ASSERT_NE(run(args).code, 1);
  std::ifstream in(out_dir / "cells.csv");
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  double lo = HUGE_VAL;
  double hi = -HUGE_VAL;
  int plausible = 0;
  while (std::getline(in, line)) {
    const auto f = split(line);
    if (f[col("plausible")] != "1") continue;
    ++plausible;
    const double mu = std::stod(f[col("mu")]);
    lo = std::min(lo, mu);
    hi = std::max(hi, mu);
  }
  const auto summary = nlohmann::json::parse(read_file(out_dir / "summary.json"));
  EXPECT_EQ(summary["plausible_count"].get<int>(), plausible);
  if (plausible > 0) {
    EXPECT_EQ(summary["ranges"][0]["lo"].get<double>(), lo);
    EXPECT_EQ(summary["ranges"][0]["hi"].get<double>(), hi);
  }
}

TEST(Cli, ConfigFileWithFlagOverride) {
  TempDir tmp;
  const auto data = meta_csv(tmp.path());
  write_file(tmp.path() / "run.cfg", "model = meta\ndata = " + data.string() +
                                         "\ngrid.a = -3:0:31\ngrid.b = 0.1:2:20\nmc_size = 3\nn_perm = 40\n");
  const auto out_dir = tmp.path() / "run";
  const auto r = run({"--config", (tmp.path() / "run.cfg").string(), "--output-dir", out_dir.string(), "--grid",
                      "a=-1:0:2", "--grid", "b=0.5:0.5:1"});
  ASSERT_TRUE(r.code == 0 || r.code == 4) << r.err;
  const auto summary = nlohmann::json::parse(read_file(out_dir / "summary.json"));
  EXPECT_EQ(summary["grid"]["size"], 2);
  EXPECT_EQ(summary["provenance"]["config"]["mc_size"], "3");
}

TEST(Cli, BinaryReportsExitCodes) {
  TempDir tmp;
  const std::string cli = SSA_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("--model bogus"), 2);
  EXPECT_EQ(status("--model mean --data " + (tmp.path() / "missing.csv").string() + " --output-dir " +
                   (tmp.path() / "o").string()),
            3);
  EXPECT_FALSE(fs::exists(tmp.path() / "o"));
}
