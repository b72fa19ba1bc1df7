#include "init.hpp"

#include <gsl/gsl_multimin.h>

#include <cmath>
#include <random>

#include "errors.hpp"

namespace pel {

namespace {

Matrix least_squares(const Matrix& X, const Matrix& Y) {
  return X.colPivHouseholderQr().solve(Y);
}

struct GarchData {
  const double* x;
  std::size_t n;
  double var;
};

// (omega, alpha, beta) from unconstrained z: omega = exp(z0),
// (alpha, beta) = softmax weights of (z1, z2) against a unit reference.
void garch_params(const gsl_vector* z, double& omega, double& alpha, double& beta) {
  omega = std::exp(gsl_vector_get(z, 0));
  const double e1 = std::exp(gsl_vector_get(z, 1));
  const double e2 = std::exp(gsl_vector_get(z, 2));
  const double denom = 1.0 + e1 + e2;
  alpha = e1 / denom;
  beta = e2 / denom;
}

double garch_nll(const gsl_vector* z, void* params) {
  const auto* data = static_cast<const GarchData*>(params);
  double omega, alpha, beta;
  garch_params(z, omega, alpha, beta);
  double sigma2 = data->var;
  double total = 0.0;
  for (std::size_t t = 0; t < data->n; ++t) {
    if (t > 0) sigma2 = omega + alpha * data->x[t - 1] * data->x[t - 1] + beta * sigma2;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return GSL_POSINF;
    total += std::log(sigma2) + data->x[t] * data->x[t] / sigma2;
  }
  return 0.5 * total;
}

}  // namespace

Vector ols_var(const VarMoments& model) {
  // responses (n x d) ~ lagged (n x ld) * [G_1 ... G_l]^T
  const Matrix Gt = least_squares(model.lagged(), model.responses());
  const Matrix G = Gt.transpose();
  return Eigen::Map<const Vector>(G.data(), G.size());
}

Vector ols_lp(const LocalProjectionMoments& model) {
  const Matrix coef = least_squares(model.regressors(), model.leads());  // k x (H+1)
  return Eigen::Map<const Vector>(coef.data(), coef.size());
}

Garch11 fit_garch11(const Vector& x) {
  require(x.size() >= 3, ErrorKind::InsufficientData, "GARCH(1,1) needs at least 3 observations");
  require(x.allFinite(), ErrorKind::Data, "GARCH(1,1) input is not finite");
  GarchData data{x.data(), static_cast<std::size_t>(x.size()), x.squaredNorm() / x.size()};
  if (!(data.var > 0.0)) data.var = 1e-8;

  gsl_vector* z = gsl_vector_alloc(3);
  // start at alpha = 0.1, beta = 0.8, omega = 0.1 var
  gsl_vector_set(z, 0, std::log(0.1 * data.var));
  gsl_vector_set(z, 1, std::log(0.1 / 0.1));
  gsl_vector_set(z, 2, std::log(0.8 / 0.1));
  gsl_vector* step = gsl_vector_alloc(3);
  gsl_vector_set_all(step, 0.5);

  gsl_multimin_function fn{&garch_nll, 3, &data};
  gsl_multimin_fminimizer* solver =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(solver, &fn, z, step);
  Garch11 out;
  for (int it = 0; it < 2000; ++it) {
    if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-8) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  garch_params(solver->x, out.omega, out.alpha, out.beta);
  out.neg_loglik = solver->fval;
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(step);
  gsl_vector_free(z);
  return out;
}

Vector mgarch_garch_init(const MgarchBekkMoments& model, CounterRng& rng, double offdiag_sd) {
  const Eigen::Index d = static_cast<Eigen::Index>(model.dim());
  std::normal_distribution<double> N(0.0, offdiag_sd);
  MgarchBekkMoments::Params P{Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    const Garch11 g = fit_garch11(model.data().col(i));
    P.C(i, i) = std::sqrt(g.omega);
    P.D(i, i) = std::sqrt(g.alpha);
    P.B(i, i) = std::sqrt(g.beta);
  }
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j + 1; i < d; ++i) P.C(i, j) = N(rng);
  for (Matrix* M : {&P.D, &P.B})
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        if (i != j) (*M)(i, j) = N(rng);
  return model.pack(P);
}

Vector perturbed_init(const Vector& theta0, CounterRng& rng, double sd) {
  std::normal_distribution<double> N(0.0, sd);
  Vector out = theta0;
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) += N(rng);
  return out;
}

}  // namespace pel
