#pragma once

#include "moments.hpp"
#include "rng.hpp"

namespace pel {

// Least squares of responses on lagged values (no intercept), packed as theta.
Vector ols_var(const VarMoments& model);

// Horizon-by-horizon least squares of leads on the regressors.
Vector ols_lp(const LocalProjectionMoments& model);

struct Garch11 {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double neg_loglik = 0.0;
  bool converged = false;
};

// Gaussian QMLE of sigma2_t = omega + alpha x_{t-1}^2 + beta sigma2_{t-1},
// with alpha, beta >= 0 and alpha + beta < 1.
Garch11 fit_garch11(const Vector& x);

// Diagonals from per-series GARCH(1,1) fits (square roots of omega, alpha,
// beta); off-diagonals of C, D, B drawn N(0, offdiag_sd^2).
Vector mgarch_garch_init(const MgarchBekkMoments& model, CounterRng& rng,
                         double offdiag_sd = 0.5);

// theta0 + N(0, sd^2 I).
Vector perturbed_init(const Vector& theta0, CounterRng& rng, double sd = 0.5);

}  // namespace pel
