#include "pel_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"

namespace pel {

namespace {

void check_specs(const PenaltySpec& p1, const PenaltySpec& p2) {
  require(std::isfinite(p1.tau) && p1.tau >= 0.0, ErrorKind::Domain, "pi must be >= 0");
  require(std::isfinite(p2.tau) && p2.tau >= 0.0, ErrorKind::Domain, "nu must be >= 0");
  require(p2.kind == PenaltyKind::Lasso, ErrorKind::InvalidArgument,
          "the multiplier penalty must be Lasso");
  if (p1.tau > 0.0) validate(p1);
}

double parameter_penalty(const PenaltySpec& p1, const Vector& theta) {
  if (p1.tau == 0.0) return 0.0;
  double total = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) total += penalty_value(p1, std::abs(theta(k)));
  return total;
}

std::vector<std::size_t> support_of(const Vector& theta) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < theta.size(); ++k)
    if (theta(k) != 0.0) out.push_back(static_cast<std::size_t>(k));
  return out;
}

DualSolution solve_inner(const MomentModel& model, const Vector& theta, double nu,
                         const DualOptions& opts, const DualSolution* warm, int iteration) {
  try {
    return maximize_dual(model.eval_all(theta), nu, opts, warm);
  } catch (const NumericalEvaluationError& e) {
    std::ostringstream msg;
    msg << "outer iteration " << iteration << ": " << e.what();
    throw NumericalEvaluationError(e.observation(), msg.str());
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << "outer iteration " << iteration << ": " << e.what();
    throw Error(e.kind(), msg.str());
  }
}

}  // namespace

double penalized_objective(const MomentModel& model, const Vector& theta, const PenaltySpec& p1,
                           const PenaltySpec& p2, const DualOptions& dual) {
  check_specs(p1, p2);
  return maximize_dual(model.eval_all(theta), p2.tau, dual).objective +
         parameter_penalty(p1, theta);
}

PelFit fit_pel(const MomentModel& model, const PenaltySpec& p1, const PenaltySpec& p2,
               const Vector& theta0, const PelOptions& opts) {
  check_specs(p1, p2);
  require(theta0.size() == static_cast<Eigen::Index>(model.p()), ErrorKind::InvalidArgument,
          "theta0 length differs from the model's parameter dimension");
  require(theta0.allFinite(), ErrorKind::Domain, "theta0 must be finite");
  require(opts.learning_rate > 0.0 && opts.max_outer >= 1, ErrorKind::InvalidArgument,
          "learning rate and iteration cap must be positive");

  const double nu = p2.tau;
  const double pi = p1.tau;
  const Eigen::Index p = theta0.size();

  PelFit fit;
  fit.nu = nu;
  fit.pi = pi;
  Vector theta = theta0;
  Vector m = Vector::Zero(p), v = Vector::Zero(p);
  DualSolution dual;
  bool have_dual = false;
  double b1t = 1.0, b2t = 1.0;
  // Intermediate iterates only need KKT-level accuracy; the final solve
  // at theta_hat is polished.
  DualOptions inner = opts.dual;
  inner.polish_steps = 0;

  for (int k = 1; k <= opts.max_outer; ++k) {
    const DualSolution* warm = opts.warm_start_dual && have_dual ? &dual : nullptr;
    dual = solve_inner(model, theta, nu, inner, warm, k);
    have_dual = true;
    const double objective = dual.objective + parameter_penalty(p1, theta);
    if (!std::isfinite(objective)) {
      std::ostringstream msg;
      msg << "non-finite penalized objective at outer iteration " << k;
      throw SolverDiagnosticError(theta, msg.str());
    }
    if (opts.keep_trace) fit.trace.push_back(objective);
    fit.objective = objective;

    const Vector grad = profile_gradient(model, theta, dual);
    if (!grad.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite profile gradient at outer iteration " << k;
      throw SolverDiagnosticError(theta, msg.str());
    }
    m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
    v = opts.beta2 * v + (1.0 - opts.beta2) * grad.cwiseAbs2();
    b1t *= opts.beta1;
    b2t *= opts.beta2;

    Vector next(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mhat = m(j) / (1.0 - b1t);
      const double vhat = v(j) / (1.0 - b2t);
      double step = opts.learning_rate / (std::sqrt(vhat) + opts.adam_eps);
      if (opts.cap_prox_step && pi > 0.0) step = std::min(step, opts.learning_rate / pi);
      const double u = theta(j) - step * mhat;
      next(j) = pi > 0.0 ? prox_step(p1, u, step) : u;
    }
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = std::move(next);
    fit.iterations = k;
    if (change <= opts.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.dual = solve_inner(model, theta, nu, opts.dual, have_dual ? &dual : nullptr, fit.iterations + 1);
  fit.objective = fit.dual.objective + parameter_penalty(p1, theta);
  if (opts.keep_trace) fit.trace.push_back(fit.objective);
  fit.theta = std::move(theta);
  fit.active_set = support_of(fit.theta);
  const BicScore bic = bic_score(fit, model);
  fit.bic = bic.value;
  fit.bic_degenerate = bic.degenerate;
  return fit;
}

BicScore bic_formula(double gbar_sq_norm, std::size_t df_theta, std::size_t df_lambda,
                     std::size_t n) {
  require(n >= 1, ErrorKind::InvalidArgument, "bic: n must be positive");
  const double nd = static_cast<double>(n);
  const double complexity = std::log(nd) / nd * static_cast<double>(df_theta + df_lambda);
  if (gbar_sq_norm == 0.0) return {-std::numeric_limits<double>::infinity(), true};
  return {std::log(gbar_sq_norm) + complexity, false};
}

BicScore bic_score(const PelFit& fit, const MomentModel& model) {
  const Vector gbar = model.eval_all(fit.theta).colwise().mean().transpose();
  return bic_formula(gbar.squaredNorm(), fit.active_set.size(), fit.dual.active_set.size(),
                     model.n());
}

TuningGrid TuningGrid::log_spaced(std::size_t n, std::size_t r, std::size_t count, double lo,
                                  double hi) {
  require(count >= 1 && lo > 0.0 && hi >= lo, ErrorKind::InvalidArgument, "bad grid spec");
  require(n >= 2 && r >= 2, ErrorKind::InvalidArgument, "grid scale needs n, r >= 2");
  const double scale = std::sqrt(std::log(static_cast<double>(r)) / static_cast<double>(n));
  TuningGrid grid;
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    const double value = scale * lo * std::pow(hi / lo, frac);
    grid.nu_values.push_back(value);
    grid.pi_values.push_back(value);
  }
  return grid;
}

void TuningGrid::validate() const {
  require(!nu_values.empty() && !pi_values.empty(), ErrorKind::Configuration,
          "tuning grid is empty");
  for (const auto* values : {&nu_values, &pi_values}) {
    for (std::size_t i = 0; i < values->size(); ++i) {
      require(std::isfinite((*values)[i]) && (*values)[i] > 0.0, ErrorKind::Configuration,
              "tuning values must be positive");
      if (i > 0)
        require((*values)[i] > (*values)[i - 1], ErrorKind::Configuration,
                "tuning values must be sorted ascending");
    }
  }
}

TuningResult select_tuning(const MomentModel& model, const TuningGrid& grid, const Vector& theta0,
                           const PelOptions& opts, unsigned threads) {
  grid.validate();
  const std::size_t np = grid.pi_values.size();
  const std::size_t total = grid.nu_values.size() * np;
  std::vector<TuningEntry> table(total);
  std::vector<PelFit> fits(total);

  parallel_for(total, threads, [&](std::size_t idx) {
    TuningEntry& entry = table[idx];
    entry.nu = grid.nu_values[idx / np];
    entry.pi = grid.pi_values[idx % np];
    try {
      fits[idx] = fit_pel(model, PenaltySpec::scad(entry.pi), PenaltySpec::lasso(entry.nu),
                          theta0, opts);
      const PelFit& f = fits[idx];
      entry.ok = true;
      entry.bic = f.bic;
      entry.degenerate = f.bic_degenerate;
      entry.df_theta = f.active_set.size();
      entry.df_lambda = f.dual.active_set.size();
      entry.iterations = f.iterations;
      entry.converged = f.converged;
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
  });

  std::size_t best = total;
  for (std::size_t i = 0; i < total; ++i) {
    if (!table[i].ok) continue;
    if (best == total) {
      best = i;
      continue;
    }
    const double a = table[i].bic, b = table[best].bic;
    const bool tie = a == b || std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
    // Row-major order visits larger (nu, pi) later, so a tie moves best forward.
    if (a < b || tie) best = i;
  }
  if (best == total) {
    std::ostringstream msg;
    msg << "all " << total << " tuning fits failed:";
    for (const auto& e : table) msg << " [nu=" << e.nu << ", pi=" << e.pi << "] " << e.error << ";";
    fail(ErrorKind::SolverFailure, msg.str());
  }
  TuningResult result;
  result.fit = std::move(fits[best]);
  result.nu = table[best].nu;
  result.pi = table[best].pi;
  result.table = std::move(table);
  return result;
}

}  // namespace pel
