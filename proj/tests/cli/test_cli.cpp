// Runs the installed command-line binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("pel_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" PEL_CLI_PATH "' " + args +
                          " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::string> lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

void write_var_data(const fs::path& path, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  std::ofstream out(path);
  for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << "z" << i + 1;
  out << '\n';
  std::vector<double> prev(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> cur(d);
    for (std::size_t i = 0; i < d; ++i) cur[i] = N(rng);
    cur[0] += 0.5 * prev[1];
    for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << cur[i];
    out << '\n';
    prev = cur;
  }
}

void write_matrix(const fs::path& path, const std::vector<std::vector<double>>& m) {
  std::ofstream out(path);
  for (std::size_t j = 0; j < m.size(); ++j) out << (j ? "," : "") << "s" << j + 1;
  out << '\n';
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

constexpr const char* kFit = "fit --data var.csv --grid-size 2 --grid-lo 0.3";

}  // namespace

TEST(Cli, MissingInputExitsThreeWithPath) {
  const fs::path dir = scratch("missing");
  const Outcome r = run("fit --data does_not_exist.csv", dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("does_not_exist.csv"), std::string::npos);
  EXPECT_NE(r.err.find("\"error\""), std::string::npos);
}

TEST(Cli, FitWritesOneRowPerParameterAndIsRepeatable) {
  const fs::path dir = scratch("fit");
  write_var_data(dir / "var.csv", 80, 3);
  ASSERT_EQ(run(std::string(kFit) + " --out a", dir).code, 0);
  ASSERT_EQ(run(std::string(kFit) + " --out b --threads 2", dir).code, 0);
  const auto theta = lines(dir / "a/theta_hat.csv");
  ASSERT_EQ(theta.size(), 1u + 9u);
  EXPECT_EQ(theta[0], "coordinate,value,active");
  EXPECT_EQ(lines(dir / "a/dual.csv").size(), 1u + 12u);
  EXPECT_EQ(lines(dir / "a/tuning.csv").size(), 1u + 4u);
  for (const char* f : {"theta_hat.csv", "dual.csv", "tuning.csv", "fit.json", "sigma_hat.csv",
                        "g1_hat.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, InferReportShapeAndDefaultsLogged) {
  const fs::path dir = scratch("infer");
  write_var_data(dir / "var.csv", 80, 3);
  ASSERT_EQ(run(std::string(kFit) + " --out fit", dir).code, 0);
  const Outcome r = run("infer --data var.csv --fit-dir fit --targets 1 --out inf", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(dir / "inf/inference.csv");
  ASSERT_EQ(rows.size(), 2u);
  const auto header = split(rows[0]);
  EXPECT_EQ(header.size(), 4u + 6u);
  EXPECT_EQ(split(rows[1])[0], "1");
  // n = 79 effective observations.
  std::ostringstream vs, bw;
  vs.precision(17);
  bw.precision(17);
  vs << 0.2 * std::pow(79.0, -1.0 / 3.0);
  bw << std::pow(79.0, 0.2);
  EXPECT_NE(r.err.find("varsigma = " + vs.str().substr(0, 10)), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("h_n = " + bw.str().substr(0, 10)), std::string::npos) << r.err;

  EXPECT_EQ(run("infer --data var.csv --fit-dir fit --targets 1 --levels 0.9,1.2", dir).code, 2);
  EXPECT_EQ(run("infer --data var.csv --fit-dir fit --targets 99", dir).code, 2);
}

TEST(Cli, SimulateSmokeRunAndReproducibility) {
  const fs::path dir = scratch("simulate");
  const std::string base = "simulate var1 --case I --n 30 --d 3 --reps 2 --nu 0.1 --pi 0.05 --log";
  ASSERT_EQ(run(base + " --out a --threads 1", dir).code, 0);
  ASSERT_EQ(run(base + " --out b", dir, "PEL_THREADS=2").code, 0);
  EXPECT_EQ(slurp(dir / "a/simulation.csv"), slurp(dir / "b/simulation.csv"));
  EXPECT_EQ(slurp(dir / "a/replications.jsonl"), slurp(dir / "b/replications.jsonl"));
  const auto rows = lines(dir / "a/simulation.csv");
  ASSERT_EQ(rows.size(), 3u);
  const auto header = split(rows[0]);
  for (const char* col : {"mse", "bias_sq", "var", "coverage_95", "median_length_95"})
    EXPECT_NE(std::find(header.begin(), header.end(), col), header.end()) << col;
  EXPECT_EQ(split(rows[1]).size(), header.size());
  EXPECT_EQ(lines(dir / "a/replications.jsonl").size(), 2u);
}

TEST(Cli, InvalidCaseAndUnknownConfigKeyExitTwo) {
  const fs::path dir = scratch("config");
  EXPECT_EQ(run("simulate var1 --case III --reps 1", dir).code, 2);
  EXPECT_EQ(run("simulate var7 --reps 1", dir).code, 2);
  EXPECT_EQ(run("frobnicate", dir).code, 2);
  std::ofstream(dir / "bad.toml") << "[decompose]\ng1 = \"g.csv\"\nsigma = \"s.csv\"\ncolour = 1\n";
  const Outcome r = run("--config bad.toml decompose", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Cli, ConfigFileDrivesDecomposition) {
  const fs::path dir = scratch("config_ok");
  write_matrix(dir / "g.csv", {{0.0, 0.0}, {0.0, 0.0}});
  write_matrix(dir / "s.csv", {{1.0, 0.0}, {0.0, 1.0}});
  std::ofstream(dir / "run.toml")
      << "[decompose]\ng1 = \"g.csv\"\nsigma = \"s.csv\"\nhorizons = 2\nout = \"dec\"\n";
  ASSERT_EQ(run("--config run.toml decompose", dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "dec/dtilde_h2.csv"));
  EXPECT_FALSE(fs::exists(dir / "dec/dtilde_h3.csv"));
}

TEST(Cli, DecomposeZeroDynamicsGivesIdentityFiles) {
  const fs::path dir = scratch("identity");
  write_matrix(dir / "g.csv", {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  write_matrix(dir / "s.csv", {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
  ASSERT_EQ(run("decompose --g1 g.csv --sigma s.csv --horizons 10 --out dec", dir).code, 0);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "dec")) {
    (void)entry;
    ++files;
  }
  EXPECT_EQ(files, 11u);
  for (int h = 1; h <= 10; ++h) {
    const auto rows = lines(dir / "dec" / ("dtilde_h" + std::to_string(h) + ".csv"));
    ASSERT_EQ(rows.size(), 4u);
    for (int i = 0; i < 3; ++i) {
      const auto cells = split(rows[static_cast<std::size_t>(i) + 1]);
      for (int j = 0; j < 3; ++j) EXPECT_EQ(cells[static_cast<std::size_t>(j)], i == j ? "1" : "0");
    }
  }
  EXPECT_EQ(lines(dir / "dec/outdegree.csv").size(), 11u);
}

TEST(Cli, DecomposeMatchesTwoByTwoOracle) {
  const fs::path dir = scratch("oracle");
  write_matrix(dir / "g.csv", {{0.4, 0.25}, {-0.2, 0.3}});
  write_matrix(dir / "s.csv", {{1.0, 0.4}, {0.4, 0.8}});
  ASSERT_EQ(run("decompose --g1 g.csv --sigma s.csv --horizons 2 --out dec", dir).code, 0);
  pel::oracle::Matrix G(2, 2), S(2, 2);
  G << 0.4, 0.25, -0.2, 0.3;
  S << 1.0, 0.4, 0.4, 0.8;
  const pel::oracle::Matrix D = pel::oracle::vardecomp_2x2_h2(G, S);
  const auto rows = lines(dir / "dec/dtilde_h2.csv");
  for (int i = 0; i < 2; ++i) {
    const auto cells = split(rows[static_cast<std::size_t>(i) + 1]);
    for (int j = 0; j < 2; ++j)
      EXPECT_NEAR(std::stod(cells[static_cast<std::size_t>(j)]), D(i, j), 1e-12);
  }
}

TEST(Cli, UnstableTransitionExitsFourWithRadius) {
  const fs::path dir = scratch("unstable");
  write_matrix(dir / "g.csv", {{1.1, 0.0}, {0.0, 0.5}});
  write_matrix(dir / "s.csv", {{1.0, 0.0}, {0.0, 1.0}});
  const Outcome r = run("decompose --g1 g.csv --sigma s.csv --out dec", dir);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("\"spectral_radius\":1.1"), std::string::npos) << r.err;
}
