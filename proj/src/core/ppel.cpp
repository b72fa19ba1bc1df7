#include "ppel.hpp"

#include <gsl/gsl_cdf.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "errors.hpp"
#include "lp_simplex.hpp"
#include "parallel.hpp"

namespace pel {

namespace {

constexpr double kLpTol = 1e-7;
constexpr double kPi = 3.14159265358979323846;

// Columns of Gbar reordered so that the targets come first.
Matrix targets_first(const Matrix& Gbar, const std::vector<std::size_t>& targets) {
  const Eigen::Index p = Gbar.cols();
  std::vector<bool> taken(static_cast<std::size_t>(p), false);
  Matrix out(Gbar.rows(), p);
  Eigen::Index col = 0;
  for (std::size_t k : targets) {
    out.col(col++) = Gbar.col(static_cast<Eigen::Index>(k));
    taken[k] = true;
  }
  for (Eigen::Index j = 0; j < p; ++j)
    if (!taken[static_cast<std::size_t>(j)]) out.col(col++) = Gbar.col(j);
  return out;
}

double min_sup_residual(const Matrix& Gt, const Vector& xi) {
  // variables (u+, u-, s) >= 0: min s s.t. |Gt (u+ - u-) - xi|_inf <= s
  const Eigen::Index p = Gt.rows(), r = Gt.cols();
  Matrix A(2 * p, 2 * r + 1);
  A << Gt, -Gt, -Vector::Ones(p), -Gt, Gt, -Vector::Ones(p);
  Vector b(2 * p);
  b << xi, -xi;
  Vector c = Vector::Zero(2 * r + 1);
  c(2 * r) = 1.0;
  const LpResult res = simplex_minimize(c, A, b);
  require(res.status == LpStatus::Optimal, ErrorKind::SolverFailure,
          "auxiliary projection LP did not reach optimality");
  return res.objective;
}

struct RowSolution {
  Vector u;
  double residual = 0.0;
};

RowSolution solve_row(const Matrix& Gt, Eigen::Index k, double varsigma) {
  const Eigen::Index p = Gt.rows(), r = Gt.cols();
  Vector xi = Vector::Zero(p);
  xi(k) = 1.0;
  Matrix A(2 * p, 2 * r);
  A << Gt, -Gt, -Gt, Gt;
  Vector b(2 * p);
  b << xi.array() + varsigma, varsigma - xi.array();
  const LpResult res = simplex_minimize(Vector::Ones(2 * r), A, b);
  if (res.status == LpStatus::Infeasible) {
    const double smallest = min_sup_residual(Gt, xi);
    std::ostringstream msg;
    msg << "projection row " << k << " infeasible at varsigma " << varsigma
        << "; smallest feasible varsigma is " << smallest;
    throw InfeasibleProjectionError(smallest, msg.str());
  }
  require(res.status == LpStatus::Optimal, ErrorKind::SolverFailure,
          "projection LP did not reach optimality");
  RowSolution out;
  out.u = res.x.head(r) - res.x.tail(r);
  out.residual = (Gt * out.u - xi).cwiseAbs().maxCoeff();
  return out;
}

Vector with_block(const Vector& theta_full, const std::vector<std::size_t>& targets,
                  const Vector& block) {
  Vector out = theta_full;
  for (std::size_t k = 0; k < targets.size(); ++k)
    out(static_cast<Eigen::Index>(targets[k])) = block(static_cast<Eigen::Index>(k));
  return out;
}

Vector gather(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(static_cast<Eigen::Index>(idx[k]));
  return out;
}

// Inverse of a symmetric matrix; adds 1e-10 I when it is numerically singular.
Matrix robust_inverse(const Matrix& S, bool& regularized) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  Matrix M = S;
  if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300))) {
    regularized = true;
    M.diagonal().array() += 1e-10;
  }
  return M.ldlt().solve(Matrix::Identity(S.rows(), S.cols()));
}

}  // namespace

double default_varsigma(std::size_t n) {
  return 0.2 * std::pow(static_cast<double>(n), -1.0 / 3.0);
}

double default_bandwidth(std::size_t n) { return std::pow(static_cast<double>(n), 0.2); }

double min_feasible_varsigma(const Matrix& Gbar, std::size_t target) {
  require(target < static_cast<std::size_t>(Gbar.cols()), ErrorKind::InvalidArgument,
          "target index out of range");
  Vector xi = Vector::Zero(Gbar.cols());
  xi(static_cast<Eigen::Index>(target)) = 1.0;
  return min_sup_residual(Gbar.transpose(), xi);
}

ProjectionRows solve_projection(const Matrix& Gbar, const std::vector<std::size_t>& targets,
                                double varsigma, unsigned threads) {
  require(std::isfinite(varsigma) && varsigma > 0.0, ErrorKind::Domain, "varsigma must be > 0");
  require(!targets.empty(), ErrorKind::InvalidArgument, "no target coordinates");
  require(Gbar.allFinite(), ErrorKind::NumericalEvaluation, "Jacobian is not finite");
  std::vector<std::size_t> seen;
  for (std::size_t k : targets) {
    require(k < static_cast<std::size_t>(Gbar.cols()), ErrorKind::InvalidArgument,
            "target index out of range");
    require(std::find(seen.begin(), seen.end(), k) == seen.end(), ErrorKind::InvalidArgument,
            "duplicate target index");
    seen.push_back(k);
  }
  const Matrix Gt = targets_first(Gbar, targets).transpose();  // p x r
  const Eigen::Index m = static_cast<Eigen::Index>(targets.size());
  std::vector<RowSolution> rows(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t k) {
    rows[k] = solve_row(Gt, static_cast<Eigen::Index>(k), varsigma);
  });
  ProjectionRows out;
  out.A.resize(m, Gbar.rows());
  out.residual_sup.resize(m);
  out.l1_norm.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const RowSolution& row = rows[static_cast<std::size_t>(k)];
    out.A.row(k) = row.u.transpose();
    out.residual_sup(k) = row.residual;
    out.l1_norm(k) = row.u.lpNorm<1>();
    require(row.residual <= varsigma + kLpTol, ErrorKind::SolverFailure,
            "projection row violates the sup-norm constraint");
  }
  out.targets = targets;
  out.varsigma = varsigma;
  return out;
}

double kernel_value(const KernelSpec& spec, double x) {
  const double a = std::abs(x);
  switch (spec.kind) {
    case KernelKind::Parzen:
      if (a <= 0.5) return 1.0 - 6.0 * a * a + 6.0 * a * a * a;
      if (a <= 1.0) return 2.0 * std::pow(1.0 - a, 3);
      return 0.0;
    case KernelKind::TukeyHanning:
      return a <= 1.0 ? 0.5 * (1.0 + std::cos(kPi * a)) : 0.0;
    case KernelKind::QS: {
      const double z = 6.0 * kPi * a / 5.0;
      if (z < 1e-4) return 1.0 - z * z / 10.0;
      return 3.0 / (z * z) * (std::sin(z) / z - std::cos(z));
    }
  }
  return 0.0;
}

KernelKind parse_kernel(const std::string& name) {
  if (name == "parzen") return KernelKind::Parzen;
  if (name == "tukey-hanning") return KernelKind::TukeyHanning;
  if (name == "qs") return KernelKind::QS;
  fail(ErrorKind::Configuration, "unknown kernel '" + name + "' (parzen, tukey-hanning, qs)");
}

std::string kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::Parzen: return "parzen";
    case KernelKind::TukeyHanning: return "tukey-hanning";
    case KernelKind::QS: return "qs";
  }
  return "parzen";
}

Matrix hac_covariance(const Matrix& f, const KernelSpec& spec) {
  const Eigen::Index n = f.rows();
  require(n >= 2, ErrorKind::InsufficientData, "HAC needs at least 2 observations");
  require(spec.bandwidth > 0.0, ErrorKind::Domain, "bandwidth must be > 0");
  const double nd = static_cast<double>(n);
  Matrix Xi = f.transpose() * f / nd;
  for (Eigen::Index j = 1; j < n; ++j) {
    const double w = kernel_value(spec, static_cast<double>(j) / spec.bandwidth);
    if (w == 0.0) continue;
    // H_j = (1/n) sum_{t >= j} f_t f_{t-j}^T; H_{-j} = H_j^T
    const Matrix Hj = f.bottomRows(n - j).transpose() * f.topRows(n - j) / nd;
    Xi += w * (Hj + Hj.transpose());
  }
  return 0.5 * (Xi + Xi.transpose());
}

Matrix psd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix projected_moments(const MomentModel& model, const ProjectionRows& rows,
                         const Vector& theta_full) {
  return model.eval_all(theta_full) * rows.A.transpose();
}

PpelEstimate fit_ppel(const MomentModel& model, const ProjectionRows& rows,
                      const PelFit& theta_hat, const PpelOptions& opts) {
  const std::size_t m = rows.targets.size();
  require(m >= 1 && m <= opts.max_block, ErrorKind::InvalidArgument,
          "target block size must be between 1 and " + std::to_string(opts.max_block));
  require(rows.A.cols() == static_cast<Eigen::Index>(model.r()), ErrorKind::InvalidArgument,
          "projection rows do not match the moment dimension");
  require(theta_hat.theta.size() == static_cast<Eigen::Index>(model.p()),
          ErrorKind::InvalidArgument, "theta_hat does not match the model");
  const Vector center = gather(theta_hat.theta, rows.targets);
  const double radius = opts.box_factor * theta_hat.nu;
  const Vector lo = center.array() - radius, hi = center.array() + radius;
  const auto project = [&](const Vector& x) { return Vector(x.cwiseMax(lo).cwiseMin(hi)); };

  struct Eval {
    bool ok = false;
    double value = std::numeric_limits<double>::infinity();
    Vector grad;
    DualSolution dual;
  };
  const auto evaluate = [&](const Vector& block, const DualSolution* warm) {
    Eval e;
    try {
      const Vector full = with_block(theta_hat.theta, rows.targets, block);
      e.dual = maximize_dual(projected_moments(model, rows, full), 0.0, opts.dual, warm);
      const Vector vjp = model.weighted_vjp(full, e.dual.weights, rows.A.transpose() * e.dual.lambda);
      e.grad = gather(vjp, rows.targets);
      e.value = e.dual.objective;
      e.ok = std::isfinite(e.value) && e.grad.allFinite();
    } catch (const Error&) {
      e.ok = false;
    }
    return e;
  };

  PpelEstimate out;
  Vector x = center;
  Eval cur = evaluate(x, nullptr);
  if (!cur.ok) {
    out.theta_tilde = x;
    out.lambda_tilde = Vector::Zero(static_cast<Eigen::Index>(m));
    out.boundary_warning = true;
    out.warning = "inner dual failed at the initial point; returning the PEL block";
    return out;
  }
  // Gauss-Newton curvature Gamma^T V^{-1} Gamma seeds the inverse Hessian.
  Matrix H = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  {
    const Vector full = with_block(theta_hat.theta, rows.targets, x);
    const Matrix F = projected_moments(model, rows, full);
    const Matrix Gamma = rows.A * model.mean_jacobian(full);
    Matrix Gm(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) Gm.col(static_cast<Eigen::Index>(k)) = Gamma.col(static_cast<Eigen::Index>(rows.targets[k]));
    const Matrix V = F.transpose() * F / static_cast<double>(F.rows());
    const Matrix curv = Gm.transpose() * V.ldlt().solve(Gm);
    Eigen::LLT<Matrix> llt(curv);
    if (llt.info() == Eigen::Success && curv.allFinite())
      H = llt.solve(Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)));
  }

  for (int it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    const Vector pg = x - project(x - cur.grad);
    if (pg.cwiseAbs().maxCoeff() <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    // Free coordinates: not pinned at a bound by the gradient.
    std::vector<bool> is_free(m, true);
    for (std::size_t k = 0; k < m; ++k) {
      const Eigen::Index i = static_cast<Eigen::Index>(k);
      if ((x(i) <= lo(i) && cur.grad(i) > 0.0) || (x(i) >= hi(i) && cur.grad(i) < 0.0))
        is_free[k] = false;
    }
    Vector g_free = cur.grad;
    for (std::size_t k = 0; k < m; ++k)
      if (!is_free[k]) g_free(static_cast<Eigen::Index>(k)) = 0.0;
    Vector d = -H * g_free;
    for (std::size_t k = 0; k < m; ++k)
      if (!is_free[k]) d(static_cast<Eigen::Index>(k)) = 0.0;
    if (!(cur.grad.dot(d) < 0.0)) {
      H.setIdentity();
      d = -g_free;
    }
    double t = 1.0;
    Eval next;
    Vector x_new;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = project(x + t * d);
      next = evaluate(x_new, &cur.dual);
      if (next.ok && next.value <= cur.value + 1e-4 * cur.grad.dot(x_new - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (next.ok) {
        out.converged = pg.cwiseAbs().maxCoeff() <= 1e3 * opts.grad_tol;
      } else {
        out.boundary_warning = true;
        out.warning = "inner dual failed along the search direction";
      }
      break;
    }
    const Vector s = x_new - x;
    const Vector y = next.grad - cur.grad;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    cur = std::move(next);
    if (s.cwiseAbs().maxCoeff() <= opts.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.theta_tilde = x;
  out.lambda_tilde = cur.dual.lambda;
  out.objective = cur.value;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (radius > 0.0 && (x(k) <= lo(k) || x(k) >= hi(k))) {
      out.boundary_warning = true;
      if (out.warning.empty()) out.warning = "estimate on the box boundary";
    }
  return out;
}

InferenceReport build_report(const MomentModel& model, const ProjectionRows& rows,
                             const PpelEstimate& estimate, const PelFit& theta_hat,
                             const KernelSpec& spec, const std::vector<double>& levels) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.targets.size());
  require(estimate.theta_tilde.size() == m, ErrorKind::InvalidArgument,
          "estimate does not match the projection rows");
  for (double level : levels)
    require(level > 0.0 && level < 1.0, ErrorKind::Configuration, "levels must lie in (0, 1)");

  InferenceReport rep;
  rep.coordinates = rows.targets;
  rep.theta_tilde = estimate.theta_tilde;
  rep.lambda_tilde = estimate.lambda_tilde;
  rep.levels = levels;
  rep.varsigma = rows.varsigma;
  rep.bandwidth = spec.bandwidth;
  rep.boundary_warning = estimate.boundary_warning;
  rep.warning = estimate.warning;

  const Vector full = with_block(theta_hat.theta, rows.targets, estimate.theta_tilde);
  const Matrix F = projected_moments(model, rows, full);
  const double n = static_cast<double>(F.rows());
  const Matrix AG = rows.A * model.mean_jacobian(full);
  Matrix Gamma(m, m);
  for (Eigen::Index k = 0; k < m; ++k) Gamma.col(k) = AG.col(static_cast<Eigen::Index>(rows.targets[static_cast<std::size_t>(k)]));
  const Matrix V = F.transpose() * F / n;
  rep.Xi = hac_covariance(F, spec);

  const Matrix Vinv = robust_inverse(V, rep.regularized);
  const Matrix Q = Gamma.transpose() * Vinv * psd_sqrt(rep.Xi);
  rep.Jhat = Q * Q.transpose();
  rep.Mhat = Gamma.transpose() * Vinv * Gamma;
  rep.Mhat = 0.5 * (rep.Mhat + rep.Mhat.transpose());
  const Matrix Minv = robust_inverse(rep.Mhat, rep.regularized);
  const Matrix Sigma = Minv * rep.Jhat * Minv;

  rep.std_errors = (Sigma.diagonal().cwiseMax(0.0) / n).cwiseSqrt();
  rep.tstats = rep.theta_tilde.cwiseQuotient(rep.std_errors);
  const Eigen::Index L = static_cast<Eigen::Index>(levels.size());
  rep.lower.resize(m, L);
  rep.upper.resize(m, L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const double z = gsl_cdf_ugaussian_Pinv(0.5 + 0.5 * levels[static_cast<std::size_t>(l)]);
    rep.lower.col(l) = rep.theta_tilde - z * rep.std_errors;
    rep.upper.col(l) = rep.theta_tilde + z * rep.std_errors;
  }
  return rep;
}

InferenceReport run_inference(const MomentModel& model, const PelFit& theta_hat,
                              const InferenceOptions& opts) {
  const std::size_t n = model.n();
  const double varsigma = opts.varsigma > 0.0 ? opts.varsigma : default_varsigma(n);
  const KernelSpec spec{opts.kernel, opts.bandwidth > 0.0 ? opts.bandwidth : default_bandwidth(n)};
  const ProjectionRows rows =
      solve_projection(model.mean_jacobian(theta_hat.theta), opts.targets, varsigma, opts.threads);
  const PpelEstimate est = fit_ppel(model, rows, theta_hat, opts.ppel);
  return build_report(model, rows, est, theta_hat, spec, opts.levels);
}

void write_report_csv(std::ostream& out, const InferenceReport& report) {
  out << "coordinate,estimate,std_error,tstat";
  for (double level : report.levels) {
    const std::string pct = format_level(level);
    out << ",lo_" << pct << ",hi_" << pct;
  }
  out << '\n';
  for (std::size_t k = 0; k < report.coordinates.size(); ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(k);
    out << report.coordinates[k] << ',' << format_double(report.theta_tilde(i)) << ','
        << format_double(report.std_errors(i)) << ',' << format_double(report.tstats(i));
    for (Eigen::Index l = 0; l < report.lower.cols(); ++l)
      out << ',' << format_double(report.lower(i, l)) << ',' << format_double(report.upper(i, l));
    out << '\n';
  }
}

}  // namespace pel
