#pragma once

#include <cstddef>
#include <vector>

#include "moments.hpp"

namespace pel {

// Inner problem: max_lambda (1/n) sum_t log(1 + lambda^T g_t) - nu |lambda|_1
// over { lambda : 1 + lambda^T g_t >= 1/n for all t }.
struct DualOptions {
  double kkt_tol = 1e-8;
  int max_newton = 200;
  double barrier_decrease = 0.2;
  double active_threshold = 1e-8;
  double hessian_ridge = 1e-10;
  // Stop the barrier schedule once mu has shrunk by this factor; the
  // active-set polish then drives the KKT residual to kkt_tol.
  double barrier_reduction = 1e-9;
  // Extra Newton steps once kkt_tol is met; each roughly squares the
  // residual. 0 trades the last digits of lambda for speed.
  int polish_steps = 1;
};

struct DualSolution {
  Vector lambda;                        // r
  std::vector<std::size_t> active_set;  // { j : |lambda_j| > active_threshold }
  double objective = 0.0;               // (1/n) sum log(1 + lambda^T g_t) - nu |lambda|_1
  Vector weights;                       // n: 1 / (n (1 + lambda^T g_t))
  Vector eta;                           // r: KKT vector
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// g is n x r (rows are g_t). warm, when given, seeds the active set and
// multiplier values (typically the solution at a nearby theta).
DualSolution maximize_dual(const Matrix& g, double nu, const DualOptions& opts = {},
                           const DualSolution* warm = nullptr);

// eta_j = (1/n) sum_t g_{t,j} / (1 + lambda_R^T g_{t,R}).
Vector kkt_eta(const Matrix& g, const Vector& lambda, double active_threshold = 1e-8);

// Max violation of the subgradient conditions at lambda.
double kkt_residual(const Vector& eta, const Vector& lambda, double nu,
                    double active_threshold = 1e-8);

// Penalized dual objective; +inf-safe: returns -inf outside the log domain.
double dual_objective(const Matrix& g, const Vector& lambda, double nu);

// Envelope gradient of theta -> max_lambda f(lambda; theta):
// (1/n) sum_t J_t^T lambda / (1 + lambda^T g_t).
Vector profile_gradient(const MomentModel& model, const Vector& theta,
                        const DualSolution& solution);

// Same, from explicit per-observation Jacobians (r x p each).
Vector profile_gradient(const std::vector<Matrix>& jacobians, const DualSolution& solution);

}  // namespace pel
