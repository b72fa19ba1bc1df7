#pragma once

#include <string>
#include <vector>

#include "el_dual.hpp"
#include "errors.hpp"
#include "moments.hpp"
#include "penalties.hpp"

namespace pel {

struct PelOptions {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double tol = 1e-6;  // on |theta_{k+1} - theta_k|_inf
  int max_outer = 2000;
  // The preconditioned step lr / (sqrt(vhat) + eps) is capped at lr / pi, so
  // coordinates whose gradient history is ~0 are shrunk at most lr per
  // iteration instead of being zeroed in one prox step.
  bool cap_prox_step = true;
  bool warm_start_dual = true;
  bool keep_trace = true;
  DualOptions dual;
};

struct PelFit {
  Vector theta;
  std::vector<std::size_t> active_set;
  DualSolution dual;
  double nu = 0.0;
  double pi = 0.0;
  double bic = 0.0;
  bool bic_degenerate = false;
  double objective = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

// Raised when the penalized objective stops being finite; carries the last
// iterate at which it was.
class SolverDiagnosticError : public Error {
 public:
  SolverDiagnosticError(Vector last_good, const std::string& what)
      : Error(ErrorKind::SolverFailure, what), last_good_(std::move(last_good)) {}
  const Vector& last_good_theta() const noexcept { return last_good_; }

 private:
  Vector last_good_;
};

// Penalized profile objective max_lambda f(lambda; theta) + sum P1(|theta_k|).
// tau = 0 in either spec disables that penalty.
double penalized_objective(const MomentModel& model, const Vector& theta, const PenaltySpec& p1,
                           const PenaltySpec& p2, const DualOptions& dual = {});

PelFit fit_pel(const MomentModel& model, const PenaltySpec& p1, const PenaltySpec& p2,
               const Vector& theta0, const PelOptions& opts = {});

struct BicScore {
  double value = 0.0;
  bool degenerate = false;
};

// log|gbar(theta)|^2 + (log n / n) (df(theta) + df(lambda)).
BicScore bic_score(const PelFit& fit, const MomentModel& model);
BicScore bic_formula(double gbar_sq_norm, std::size_t df_theta, std::size_t df_lambda,
                     std::size_t n);

struct TuningGrid {
  std::vector<double> nu_values;
  std::vector<double> pi_values;

  // count log-spaced values over [lo, hi] * sqrt(log r / n) for both.
  static TuningGrid log_spaced(std::size_t n, std::size_t r, std::size_t count = 8,
                               double lo = 0.01, double hi = 1.0);
  void validate() const;
};

struct TuningEntry {
  double nu = 0.0;
  double pi = 0.0;
  bool ok = false;
  double bic = 0.0;
  bool degenerate = false;
  std::size_t df_theta = 0;
  std::size_t df_lambda = 0;
  int iterations = 0;
  bool converged = false;
  std::string error;
};

struct TuningResult {
  PelFit fit;
  double nu = 0.0;
  double pi = 0.0;
  std::vector<TuningEntry> table;  // nu-major order
};

// Fits every (nu, pi) pair, keeps the smallest BIC; ties go to larger
// (nu, pi). threads = 0 uses all hardware threads.
TuningResult select_tuning(const MomentModel& model, const TuningGrid& grid, const Vector& theta0,
                           const PelOptions& opts = {}, unsigned threads = 1);

}  // namespace pel
