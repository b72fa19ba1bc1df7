#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "el_dual.hpp"
#include "moments.hpp"
#include "pel_solver.hpp"

namespace pel {

struct ProjectionRows {
  Matrix A;                          // m x r
  std::vector<std::size_t> targets;  // M, in the order of the rows
  double varsigma = 0.0;
  Vector residual_sup;  // per row |Gbar^T a_k - xi_k|_inf
  Vector l1_norm;       // per row |a_k|_1
};

// varsigma = 0.2 n^{-1/3}
double default_varsigma(std::size_t n);

// Row k solves min |u|_1 s.t. |Gbar^T u - e_{M_k}|_inf <= varsigma. Throws
// InfeasibleProjectionError with the smallest feasible varsigma when a row
// has no solution.
ProjectionRows solve_projection(const Matrix& Gbar, const std::vector<std::size_t>& targets,
                                double varsigma, unsigned threads = 1);

// min_u |Gbar^T u - e_target|_inf.
double min_feasible_varsigma(const Matrix& Gbar, std::size_t target);

enum class KernelKind { Parzen, TukeyHanning, QS };

struct KernelSpec {
  KernelKind kind = KernelKind::Parzen;
  double bandwidth = 1.0;
};

// h = n^{1/5}
double default_bandwidth(std::size_t n);

double kernel_value(const KernelSpec& spec, double x);

KernelKind parse_kernel(const std::string& name);
std::string kernel_name(KernelKind kind);

// sum_{|j| < n} K(j / h) H_j with H_j = (1/n) sum_t f_t f_{t-j}^T (f not
// demeaned), symmetrized.
Matrix hac_covariance(const Matrix& f, const KernelSpec& spec);

// Symmetric square root with negative eigenvalues clipped to 0.
Matrix psd_sqrt(const Matrix& S);

struct PpelOptions {
  double box_factor = 10.0;  // box radius = box_factor * nu
  int max_iterations = 200;
  double grad_tol = 1e-10;
  double step_tol = 1e-12;
  std::size_t max_block = 10;
  DualOptions dual;
};

struct PpelEstimate {
  Vector theta_tilde;   // m
  Vector lambda_tilde;  // m
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool boundary_warning = false;
  std::string warning;
};

// Projected moments f_t = A g_t(theta) for theta with the M block replaced.
Matrix projected_moments(const MomentModel& model, const ProjectionRows& rows,
                         const Vector& theta_full);

// Minimizes the m-dimensional unpenalized EL of f_t over the box
// |theta_M - theta_hat_M|_inf <= box_factor * nu with a projected BFGS.
PpelEstimate fit_ppel(const MomentModel& model, const ProjectionRows& rows,
                      const PelFit& theta_hat, const PpelOptions& opts = {});

struct InferenceReport {
  std::vector<std::size_t> coordinates;
  Vector theta_tilde;
  Vector lambda_tilde;
  Matrix Jhat;
  Matrix Mhat;
  Matrix Xi;
  Vector std_errors;
  std::vector<double> levels;
  Matrix lower;  // m x levels
  Matrix upper;
  Vector tstats;
  double varsigma = 0.0;
  double bandwidth = 0.0;
  bool regularized = false;
  bool boundary_warning = false;
  std::string warning;
};

InferenceReport build_report(const MomentModel& model, const ProjectionRows& rows,
                             const PpelEstimate& estimate, const PelFit& theta_hat,
                             const KernelSpec& spec, const std::vector<double>& levels);

struct InferenceOptions {
  std::vector<std::size_t> targets;
  double varsigma = 0.0;   // 0: default_varsigma(n)
  KernelKind kernel = KernelKind::Parzen;
  double bandwidth = 0.0;  // 0: default_bandwidth(n)
  std::vector<double> levels{0.90, 0.95, 0.99};
  PpelOptions ppel;
  unsigned threads = 1;
};

// solve_projection at theta_hat, fit_ppel, build_report.
InferenceReport run_inference(const MomentModel& model, const PelFit& theta_hat,
                              const InferenceOptions& opts);

// coordinate,estimate,std_error,tstat,lo_<pct>,hi_<pct>,...
void write_report_csv(std::ostream& out, const InferenceReport& report);

}  // namespace pel
