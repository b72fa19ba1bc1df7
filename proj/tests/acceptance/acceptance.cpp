// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--threads N] [--out DIR] [criterion ...]
//
// With no criteria listed every criterion 1..9 runs. Criteria 5 and 6 share
// one 200-replication study; criterion 5 reads its first 100 replications,
// which are exactly those of a 100-replication study with the same seed.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "el_dual.hpp"
#include "moments.hpp"
#include "oracles.hpp"
#include "penalties.hpp"
#include "ppel.hpp"
#include "simlab.hpp"

namespace fs = std::filesystem;
using namespace pel;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Settings {
  unsigned threads = 0;
  std::optional<fs::path> out;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> N(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = N(rng);
  return m;
}

// ---- 1: scalar dual against bisection ---------------------------------------

Verdict dual_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(2, 10);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst = 0.0;
  int instances = 0;
  while (instances < 100) {
    const int n = size(rng);
    Vector g(n);
    for (int t = 0; t < n; ++t) g(t) = N(rng) + 0.3;
    if (g.maxCoeff() <= 0.0 || g.minCoeff() >= 0.0) continue;  // unbounded without penalty
    const double oracle = oracle::scalar_el_multiplier(g, 0.0);
    const DualSolution s = maximize_dual(g, 0.0);
    worst = std::max(worst, std::abs(s.lambda(0) - oracle));
    ++instances;
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-7 && secs < 5.0,
          "max |dlambda| = " + num(worst) + " over 100 instances (tol 1e-7), " + num(secs, 3) +
              " s (limit 5 s)"};
}

// ---- 2: envelope gradient against finite differences -------------------------

Verdict profile_gradient_check() {
  const auto start = Clock::now();
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> size(20, 60);
  std::uniform_real_distribution<double> penalty(0.0, 0.05);
  double worst = 0.0;
  int instances = 0;
  while (instances < 50) {
    const int n = size(rng);
    const Matrix X = random_matrix(rng, n, 3);
    const Matrix Z = random_matrix(rng, n, 1);
    // g_t = (x1 - a z^2, x2 - exp(b) z, x3 - a b z), nonlinear in (a, b).
    FunctionalMoments model(
        static_cast<std::size_t>(n), 3, 2,
        [&](std::size_t t, const Vector& th, Eigen::Ref<Vector> out) {
          const auto i = static_cast<Eigen::Index>(t);
          const double z = Z(i, 0);
          out(0) = X(i, 0) - th(0) * z * z;
          out(1) = X(i, 1) - std::exp(th(1)) * z;
          out(2) = X(i, 2) - th(0) * th(1) * z;
        },
        [&](std::size_t t, const Vector& th, Eigen::Ref<Matrix> out) {
          const auto i = static_cast<Eigen::Index>(t);
          const double z = Z(i, 0);
          out.setZero();
          out(0, 0) = -z * z;
          out(1, 1) = -std::exp(th(1)) * z;
          out(2, 0) = -th(1) * z;
          out(2, 1) = -th(0) * z;
        });
    const Vector theta = random_matrix(rng, 2, 1, 0.3).col(0);
    const double nu = penalty(rng);
    try {
      const DualSolution s = maximize_dual(model.eval_all(theta), nu);
      const Vector grad = profile_gradient(model, theta, s);
      Vector fd(2);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < 2; ++k) {
        Vector tp = theta, tm = theta;
        tp(k) += h;
        tm(k) -= h;
        fd(k) = (maximize_dual(model.eval_all(tp), nu).objective -
                 maximize_dual(model.eval_all(tm), nu).objective) /
                (2 * h);
      }
      worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-6));
      ++instances;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UnboundedDual) throw;  // redraw unbounded instances
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-3 && secs < 30.0,
          "max relative error = " + num(worst) + " over 50 instances (tol 1e-3), " +
              num(secs, 3) + " s (limit 30 s)"};
}

// ---- 3: projection LP against an independent simplex -------------------------

Verdict projection_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> pdist(1, 8);
  std::uniform_real_distribution<double> sdist(0.01, 0.3);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = pdist(rng);
    const int r = std::uniform_int_distribution<int>(p, 12)(rng);
    const Matrix G = random_matrix(rng, r, p);
    const auto target =
        static_cast<std::size_t>(std::uniform_int_distribution<int>(0, p - 1)(rng));
    const double s = sdist(rng);
    const ProjectionRows rows = solve_projection(G, {target}, s);
    Vector xi = Vector::Zero(p);
    xi(static_cast<Eigen::Index>(target)) = 1.0;
    const auto value = oracle::projection_l1_value(G.transpose(), xi, s);
    if (!value) return {false, "oracle reports infeasible at instance " + std::to_string(rep)};
    worst = std::max(worst, std::abs(rows.l1_norm(0) - *value));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-6 && secs < 30.0,
          "max |d l1| = " + num(worst) + " over 50 instances (tol 1e-6), " + num(secs, 3) +
              " s (limit 30 s)"};
}

// ---- 4: HAC ------------------------------------------------------------------

Verdict hac_checks() {
  Matrix f(3, 1);
  f << 0.7, -1.2, 0.4;
  const double lib = hac_covariance(f, {KernelKind::Parzen, 2.0})(0, 0);
  const double hand = oracle::parzen_hac_scalar({0.7, -1.2, 0.4}, 2.0);
  std::mt19937_64 rng(104);
  double min_eig = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix x = random_matrix(rng, 20 + rep % 40, 1 + rep % 5);
    const Matrix Xi = hac_covariance(x, {KernelKind::Parzen, default_bandwidth(x.rows())});
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(Xi).eigenvalues().minCoeff());
  }
  return {lib == hand && min_eig >= -1e-10,
          "3-observation sum " + std::string(lib == hand ? "identical" : "differs") +
              " (|diff| = " + num(std::abs(lib - hand)) + "); min eigenvalue over 100 series = " +
              num(min_eig) + " (tol -1e-10)"};
}

// ---- 5, 6: VAR study ---------------------------------------------------------

DgpConfig var_study() {
  DgpConfig c;
  c.family = Family::Var1;
  c.n = 50;
  c.dim = 10;
  c.design = DesignCase::I;
  c.seed = 1;
  return c;
}

void save(const Settings& s, const std::string& stem, const MonteCarloReport& report) {
  if (!s.out) return;
  fs::create_directories(*s.out);
  std::ofstream csv(*s.out / (stem + ".csv"), std::ios::binary);
  write_monte_carlo_csv(csv, report);
  std::ofstream log(*s.out / (stem + ".jsonl"), std::ios::binary);
  write_replication_log(log, report);
}

std::optional<MonteCarloReport> g_var_report;
double g_var_seconds = 0.0;

const MonteCarloReport& var_report(const Settings& s) {
  if (!g_var_report) {
    const auto start = Clock::now();
    g_var_report = run_monte_carlo(var_study(), EstimatorSpec{}, 200, s.threads);
    g_var_seconds = seconds_since(start);
    save(s, "var1_case1_n50_d10_N200", *g_var_report);
  }
  return *g_var_report;
}

Verdict var_mse(const Settings& s) {
  const MonteCarloReport& report = var_report(s);
  std::vector<Vector> pel_hat, ols_hat;
  std::size_t failures = 0;
  for (const ReplicationRecord& rec : report.records) {
    if (rec.index >= 100) continue;
    if (!rec.ok) {
      ++failures;
      continue;
    }
    pel_hat.push_back(rec.theta_hat);
    ols_hat.push_back(rec.theta_ols);
  }
  const ErrorSummary pel_err = summarize_errors(pel_hat, report.theta0);
  const ErrorSummary ols_err = summarize_errors(ols_hat, report.theta0);
  const bool pass = pel_err.mse < 0.010 && pel_err.mse < 0.5 * ols_err.mse;
  return {pass, "PEL MSE = " + num(pel_err.mse) + " (< 0.010), OLS MSE = " + num(ols_err.mse) +
                    ", ratio = " + num(pel_err.mse / ols_err.mse) + " (< 0.5), N = 100, failures " +
                    std::to_string(failures) + ", shared study " + num(g_var_seconds, 4) + " s"};
}

std::size_t level_index(const MonteCarloReport& report, double level) {
  for (std::size_t l = 0; l < report.levels.size(); ++l)
    if (std::abs(report.levels[l] - level) < 1e-12) return l;
  throw Error(ErrorKind::Configuration, "level not in the study");
}

Verdict var_coverage(const Settings& s) {
  const MonteCarloReport& report = var_report(s);
  const std::size_t l = level_index(report, 0.95);
  const double cov = report.ci.coverage[l];
  std::size_t ci_failures = 0;
  for (const ReplicationRecord& rec : report.records)
    if (rec.ok && !rec.ci_ok) ++ci_failures;
  return {cov >= 0.90 && cov <= 0.99,
          "95% coverage = " + num(cov) + " in [0.90, 0.99] over " + std::to_string(report.ci.count) +
              " intervals (coordinate " + std::to_string(report.target) + ", truth " +
              num(report.theta0(static_cast<Eigen::Index>(report.target))) +
              "), median length " + num(report.ci.median_length[l]) + ", interval failures " +
              std::to_string(ci_failures) + ", N = 200"};
}

// ---- 7: MGARCH study ---------------------------------------------------------

Verdict mgarch_smoke(const Settings& s) {
  DgpConfig c;
  c.family = Family::Mgarch;
  c.n = 50;
  c.dim = 10;
  c.design = DesignCase::I;
  c.seed = 1;
  EstimatorSpec spec;
  spec.pilot_tuning = true;
  const auto start = Clock::now();
  const MonteCarloReport report = run_monte_carlo(c, spec, 25, s.threads);
  const double secs = seconds_since(start);
  save(s, "mgarch_case1_n50_d10_N25", report);
  const double cov = report.ci.coverage[level_index(report, 0.95)];
  std::string first_ci_error;
  for (const ReplicationRecord& rec : report.records)
    if (rec.ok && !rec.ci_ok) {
      first_ci_error = rec.ci_error;
      break;
    }
  const bool pass = report.failures == 0 && report.pel.mse < 0.5 && cov >= 0.80 && cov <= 1.0 &&
                    secs <= 900.0;
  std::string detail = "MSE = " + num(report.pel.mse) + " (< 0.5), fit failures " +
                       std::to_string(report.failures) + "/25, 95% coverage = " + num(cov) +
                       " in [0.80, 1.0] over " + std::to_string(report.ci.count) +
                       " intervals, pilot (nu, pi) = (" + num(report.nu) + ", " + num(report.pi) +
                       "), " + num(secs, 4) + " s (limit 900 s)";
  if (!first_ci_error.empty()) detail += "; first interval error: " + first_ci_error;
  return {pass, detail};
}

// ---- 8: variance decomposition -----------------------------------------------

Verdict decomposition_checks() {
  std::mt19937_64 rng(108);
  double row_dev = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + rep % 6;
    Matrix G = random_matrix(rng, d, d);
    G *= 0.8 / std::max(spectral_radius(G), 1e-3);
    const Matrix B = random_matrix(rng, d, d);
    const Matrix S = B * B.transpose() + Matrix::Identity(d, d);
    for (const Matrix& D : variance_decomposition(G, S, 10).dtilde)
      row_dev = std::max(row_dev, (D.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }

  Matrix S = Matrix::Zero(4, 4);
  S.diagonal() << 1.0, 0.5, 2.0, 3.0;
  bool identity = true;
  for (const Matrix& D : variance_decomposition(Matrix::Zero(4, 4), S, 10).dtilde)
    identity = identity && D == Matrix::Identity(4, 4);

  double symbolic = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Matrix G = random_matrix(rng, 2, 2, 0.4);
    if (spectral_radius(G) >= 0.95) continue;
    const Matrix B = random_matrix(rng, 2, 2);
    const Matrix Sig = B * B.transpose() + 0.1 * Matrix::Identity(2, 2);
    const Matrix lib = variance_decomposition(G, Sig, 2).dtilde[1];
    symbolic = std::max(symbolic, (lib - oracle::vardecomp_2x2_h2(G, Sig)).cwiseAbs().maxCoeff());
  }
  // Division by the row total leaves at most a few units in the last place.
  const bool pass = row_dev <= 1e-14 && identity && symbolic <= 1e-12;
  return {pass, "max |row sum - 1| = " + num(row_dev) + " (tol 1e-14), zero dynamics " +
                    (identity ? "identity" : "NOT identity") + ", 2x2 max |diff| = " +
                    num(symbolic) + " (tol 1e-12)"};
}

// ---- 9: property suites --------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool simulate_is_reproducible(std::string& note) {
  const fs::path dir = fs::temp_directory_path() / "pel_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string base = std::string("'") + PEL_CLI_PATH +
                           "' simulate var1 --case II --n 40 --d 4 --reps 4 --seed 17 --log";
  for (const char* run : {"a --threads 1", "b --threads 3"}) {
    const std::string cmd =
        "cd '" + dir.string() + "' && " + base + " --out " + run + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      note = "simulate run failed";
      return false;
    }
  }
  const bool same = slurp(dir / "a/simulation.csv") == slurp(dir / "b/simulation.csv") &&
                    slurp(dir / "a/replications.jsonl") == slurp(dir / "b/replications.jsonl") &&
                    !slurp(dir / "a/simulation.csv").empty();
  note = same ? "byte-identical" : "outputs differ";
  return same;
}

Verdict property_suites() {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::string> failed;

  // Penalty derivative against central differences, away from the knots.
  double fd_err = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const double tau = 0.05 + U(rng);
    const PenaltySpec spec = rep % 2 ? PenaltySpec::scad(tau) : PenaltySpec::lasso(tau);
    const double t = 5.0 * tau * U(rng) + 1e-3;
    if (std::abs(t - tau) < 1e-3 || std::abs(t - spec.scad_a * tau) < 1e-3) continue;
    const double h = 1e-6;
    const double fd = (penalty_value(spec, t + h) - penalty_value(spec, t - h)) / (2 * h);
    fd_err = std::max(fd_err, std::abs(fd - penalty_deriv(spec, t)));
  }
  if (fd_err > 1e-6) failed.push_back("penalty derivative");

  // The prox output is no worse than any point on a fine grid.
  double prox_gap = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const double tau = 0.1 + U(rng);
    const PenaltySpec spec = rep % 2 ? PenaltySpec::scad(tau) : PenaltySpec::lasso(tau);
    const double v = 8.0 * (U(rng) - 0.5);
    const double step = 0.05 + 4.0 * U(rng);
    const auto obj = [&](double u) {
      return (u - v) * (u - v) / (2 * step) + penalty_value(spec, std::abs(u));
    };
    const double best = obj(prox_step(spec, v, step));
    for (int k = -4000; k <= 4000; ++k) prox_gap = std::max(prox_gap, best - obj(k * 0.002));
  }
  if (prox_gap > 1e-12) failed.push_back("prox optimality");

  // SCAD is constant at (a + 1) tau^2 / 2 beyond a tau.
  double plateau = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const double tau = 0.05 + U(rng);
    const PenaltySpec spec = PenaltySpec::scad(tau);
    const double t = spec.scad_a * tau * (1.0 + 3.0 * U(rng));
    plateau = std::max(plateau, std::abs(penalty_value(spec, t) -
                                         (spec.scad_a + 1.0) * tau * tau / 2.0));
  }
  if (plateau > 1e-14) failed.push_back("SCAD plateau");

  // Kernels are symmetric with K(0) = 1.
  bool kernels = true;
  for (KernelKind kind : {KernelKind::Parzen, KernelKind::TukeyHanning, KernelKind::QS}) {
    const KernelSpec spec{kind, 1.0};
    kernels = kernels && kernel_value(spec, 0.0) == 1.0;
    for (int rep = 0; rep < 100; ++rep) {
      const double x = 3.0 * U(rng);
      kernels = kernels && kernel_value(spec, x) == kernel_value(spec, -x);
    }
  }
  if (!kernels) failed.push_back("kernel symmetry");

  // MSE = Bias^2 + Var.
  double identity = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index p = 1 + rep % 7;
    const Vector truth = random_matrix(rng, p, 1).col(0);
    std::vector<Vector> draws;
    for (int i = 0; i < 2 + rep % 10; ++i) draws.push_back(random_matrix(rng, p, 1).col(0));
    const ErrorSummary e = summarize_errors(draws, truth);
    identity = std::max(identity, std::abs(e.mse - e.bias_sq - e.var));
  }
  if (identity > 1e-14) failed.push_back("mse identity");

  std::string repro;
  if (!simulate_is_reproducible(repro)) failed.push_back("simulate reproducibility");

  std::string detail = "derivative err " + num(fd_err) + ", prox gap " + num(prox_gap) +
                       ", plateau err " + num(plateau) + ", kernels " +
                       (kernels ? "ok" : "bad") + ", mse identity err " + num(identity) +
                       ", simulate reruns " + repro;
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  Settings settings;
  if (const char* env = std::getenv("PEL_THREADS")) settings.threads = std::stoul(env);
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--threads" && i + 1 < argc)
      settings.threads = static_cast<unsigned>(std::stoul(argv[++i]));
    else if (arg == "--out" && i + 1 < argc)
      settings.out = fs::path(argv[++i]);
    else
      selected.push_back(std::stoi(arg));
  }
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::map<int, std::function<Verdict()>> criteria{
      {1, dual_oracle},
      {2, profile_gradient_check},
      {3, projection_oracle},
      {4, hac_checks},
      {5, [&] { return var_mse(settings); }},
      {6, [&] { return var_coverage(settings); }},
      {7, [&] { return mgarch_smoke(settings); }},
      {8, decomposition_checks},
      {9, property_suites},
  };

  bool all = true;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
