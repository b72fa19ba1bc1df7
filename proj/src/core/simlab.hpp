#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "moments.hpp"
#include "pel_solver.hpp"
#include "ppel.hpp"
#include "rng.hpp"

namespace pel {

enum class Family { Var1, Lp, Mgarch };
enum class DesignCase { I, II };

Family parse_family(const std::string& name);
std::string family_name(Family family);
DesignCase parse_case(const std::string& label);
std::string case_name(DesignCase c);

struct DgpConfig {
  Family family = Family::Var1;
  std::size_t n = 50;
  std::size_t dim = 10;  // d_z for VAR, d_y for MGARCH; LP is always bivariate
  DesignCase design = DesignCase::I;
  std::uint64_t seed = 1;
  int burn_in = 200;
  // VAR(1)
  double sparsity = 0.1;
  double signal_to_noise = 2.0;
  int max_redraws = 100;
  // local projection
  int lp_horizons = 20;
  int lp_lags = 4;
  std::optional<Vector> shock_series;  // surrogate when absent
  // MGARCH
  double mgarch_offdiag_density = 0.1;
  double mgarch_offdiag_value = 0.1;
  int basis_dim = 5;

  void validate() const;
};

double spectral_radius(const Matrix& A);

// Raised when a transition matrix has spectral radius >= 1.
class UnstableSystemError : public Error {
 public:
  UnstableSystemError(double radius, const std::string& what)
      : Error(ErrorKind::SolverFailure, what), radius_(radius) {}
  double spectral_radius() const noexcept { return radius_; }

 private:
  double radius_;
};

// Case I: identity; Case II: 0.2^{|i-j|}.
Matrix var_error_covariance(std::size_t d, DesignCase design);

// Stationary covariance of z_t = A z_{t-1} + e_t, Var(e) = S.
Matrix stationary_covariance(const Matrix& A, const Matrix& S);

struct VarDesign {
  Matrix G1;
  Matrix Sigma;
};

// 10% nonzero N(0,1) entries at random positions, then a scalar rescale
// found by bisection so that tr Var(G1 z) : tr Sigma = signal_to_noise.
VarDesign draw_var_design(const DgpConfig& config, CounterRng& rng);

struct VarSample {
  Matrix data;  // n x d
  Vector theta0;
};

VarSample simulate_var1(const VarDesign& design, std::size_t n, int burn_in, CounterRng& rng);
VarSample gen_var1(const DgpConfig& config, CounterRng& rng);

// Regime-switching scale-mixture normal: SD 0.077 for the first 300 draws,
// 0.012 afterwards; within a regime 10% of draws have 3x the base scale.
Vector shock_surrogate(std::size_t n, CounterRng& rng);

struct LpDesign {
  Matrix G1;     // 2 x 2
  Vector b0;     // 2
  Matrix Sigma;  // 2 x 2
};

LpDesign lp_design();

struct LpSample {
  Vector target;    // z_1
  Vector shock;
  Matrix controls;  // (z_1, z_2, shock)
  Matrix z;         // n x 2
  Vector theta0;    // true coefficients of the stacked LP system
  Vector irf;       // beta^{(h)}, h = 0..H
};

// True LP coefficients: alpha = 0, beta^{(h)} = e1' G^h b0, first-lag
// coefficients on (z1, z2) = e1' G^{h+1}, everything else 0.
Vector lp_true_theta(const LpDesign& design, int horizons, int lags);

LpSample gen_lp(const DgpConfig& config, CounterRng& rng);

struct MgarchDesign {
  Matrix C, D, B;
};

MgarchDesign draw_mgarch_design(const DgpConfig& config, CounterRng& rng);

struct MgarchSample {
  Matrix data;
  Vector theta0;
  bool clipped = false;  // some H_t needed eigenvalue clipping
};

MgarchSample simulate_mgarch(const MgarchDesign& design, std::size_t n, int burn_in,
                             int basis_dim, CounterRng& rng);
MgarchSample gen_mgarch(const DgpConfig& config, CounterRng& rng);

// Monte Carlo

enum class InitMode { Ols, Perturbed, Garch };

struct EstimatorSpec {
  // Tuning: a fixed pair when both are > 0, otherwise BIC over the grid,
  // either once on a pilot sample (reused by every replication) or per
  // replication.
  double nu = 0.0;
  double pi = 0.0;
  std::optional<TuningGrid> grid;  // default: log_spaced(n, r, grid_size, grid_lo)
  std::size_t grid_size = 4;
  double grid_lo = 0.25;
  bool pilot_tuning = false;
  PelOptions pel;
  std::optional<InitMode> init;  // default: OLS for VAR/LP, perturbed for MGARCH
  double init_sd = 0.5;
  bool inference = true;
  std::optional<std::size_t> target;  // default: first nonzero coordinate of theta0
  std::vector<double> levels{0.90, 0.95, 0.99};
  KernelKind kernel = KernelKind::Parzen;
  double varsigma = 0.0;
  double bandwidth = 0.0;
  PpelOptions ppel;
};

struct ReplicationRecord {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  Vector theta_hat;
  Vector theta_ols;  // empty when there is no least-squares comparator
  double nu = 0.0;
  double pi = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t df_theta = 0;
  bool ci_ok = false;
  std::string ci_error;
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> lower, upper;
};

struct ErrorSummary {
  double mse = 0.0;
  double bias_sq = 0.0;
  double var = 0.0;
  std::size_t count = 0;
};

// MSE = mean_i |th_i - th0|^2 / p, Bias^2 = |mean_i th_i - th0|^2 / p,
// Var = MSE - Bias^2. NaN fields when estimates is empty.
ErrorSummary summarize_errors(const std::vector<Vector>& estimates, const Vector& theta0);

struct CoverageSummary {
  std::vector<double> coverage;      // NaN when no interval was produced
  std::vector<double> median_length;
  std::size_t count = 0;
};

CoverageSummary summarize_coverage(const std::vector<ReplicationRecord>& records, double truth,
                                   std::size_t level_count);

struct MonteCarloReport {
  DgpConfig config;
  double nu = 0.0;  // pair used by every replication; NaN when tuned per replication
  double pi = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  Vector theta0;
  std::size_t target = 0;
  std::vector<double> levels;
  ErrorSummary pel;
  std::optional<ErrorSummary> ols;
  CoverageSummary ci;
  std::vector<ReplicationRecord> records;
};

MonteCarloReport run_monte_carlo(const DgpConfig& config, const EstimatorSpec& spec,
                                 std::size_t replications, unsigned threads = 1);

// method,case,n,dim,replications,failures,mse,bias_sq,var,cov_<l>...,len_<l>...
void write_monte_carlo_csv(std::ostream& out, const MonteCarloReport& report);
// One JSON object per replication.
void write_replication_log(std::ostream& out, const MonteCarloReport& report);

// Connectedness

struct Decomposition {
  std::vector<Matrix> dtilde;  // horizon h = 1..H at index h-1
  Matrix outdegree;            // H x d column sums
};

Decomposition variance_decomposition(const Matrix& G1, const Matrix& Sigma, int horizons);

}  // namespace pel
