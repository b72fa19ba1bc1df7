#include "el_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace pel {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kBoundaryFraction = 0.99;
constexpr double kDivergence = 1e8;

double domain_floor(Eigen::Index n) { return 1.0 / static_cast<double>(n); }

// Largest t in (0, 1] keeping 1 + (lam + t d)^T g_t >= floor, shortened by
// kBoundaryFraction when the boundary is hit.
double max_domain_step(const Vector& s, const Vector& gd, double floor) {
  double t = 1.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (gd(i) < 0.0) t = std::min(t, kBoundaryFraction * (s(i) - floor) / -gd(i));
  return t;
}

double mean_log(const Vector& s) { return s.array().log().mean(); }

// Below this predicted gain the Armijo comparison is roundoff, so the full
// (domain-limited) Newton step is taken.
bool armijo_is_noise(double slope, double f0) {
  return slope <= 1e-14 * std::max(1.0, std::abs(f0));
}

Matrix weighted_gram(const Matrix& g, const Vector& w) {
  // (1/n) sum_t w_t g_t g_t^T
  Matrix gw = g.array().colwise() * w.array().sqrt();
  Matrix H = Matrix::Zero(g.cols(), g.cols());
  H.selfadjointView<Eigen::Lower>().rankUpdate(gw.transpose(), 1.0 / static_cast<double>(g.rows()));
  return H.selfadjointView<Eigen::Lower>();
}

Vector solve_spd(Matrix H, const Vector& rhs, double ridge) {
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    H.diagonal().array() += ridge * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Matrix> ldlt(H);
    return ldlt.solve(rhs);
  }
  return llt.solve(rhs);
}

std::vector<Eigen::Index> support(const Vector& lambda, double threshold) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < lambda.size(); ++j)
    if (std::abs(lambda(j)) > threshold) out.push_back(j);
  return out;
}

Matrix gather_columns(const Matrix& g, const std::vector<Eigen::Index>& idx) {
  Matrix out(g.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = g.col(idx[k]);
  return out;
}

// Active-set Newton for nu > 0: maximize the smooth restriction
// (1/n) sum log(1 + lam_R^T g_R) - nu sigma_R^T lam_R with sign(lam_j) fixed
// to sigma_j. Coordinates that hit zero leave R; inactive coordinates whose
// |eta_j| exceeds nu join R. Returns false when the budget runs out.
bool active_set_solve(const Matrix& g, double nu, Vector& lambda, const DualOptions& opts,
                      int budget, int& iterations) {
  const Eigen::Index n = g.rows();
  const Eigen::Index r = g.cols();
  const double floor = domain_floor(n);

  std::vector<Eigen::Index> R = support(lambda, 0.0);
  Vector sigma = Vector::Zero(r);
  for (Eigen::Index j : R) sigma(j) = lambda(j) > 0.0 ? 1.0 : -1.0;
  for (Eigen::Index j = 0; j < r; ++j)
    if (sigma(j) == 0.0) lambda(j) = 0.0;

  Vector s = Vector::Ones(n) + g * lambda;
  if ((s.array() <= floor).any()) return false;

  const int max_rounds = 4 * static_cast<int>(r) + 20;
  for (int round = 0; round < max_rounds; ++round) {
    // Newton on R.
    bool restart = true;
    while (restart) {
      restart = false;
      if (R.empty()) break;
      const Matrix gR = gather_columns(g, R);
      Vector lamR(static_cast<Eigen::Index>(R.size()));
      Vector sigR(lamR.size());
      for (std::size_t k = 0; k < R.size(); ++k) {
        lamR(static_cast<Eigen::Index>(k)) = lambda(R[k]);
        sigR(static_cast<Eigen::Index>(k)) = sigma(R[k]);
      }
      double last_norm = std::numeric_limits<double>::infinity();
      int extra = 0;
      for (;;) {
        const Vector inv_s = s.cwiseInverse();
        const Vector grad = gR.transpose() * inv_s / static_cast<double>(n) - nu * sigR;
        const double norm = grad.cwiseAbs().maxCoeff();
        if (norm <= 0.5 * opts.kkt_tol) {
          // Quadratic convergence: a few more steps reach working precision;
          // stop as soon as progress stalls.
          if (extra >= opts.polish_steps || norm >= 0.1 * last_norm || iterations >= budget) break;
          ++extra;
        }
        last_norm = norm;
        if (iterations >= budget) return false;
        ++iterations;

        const Matrix H = weighted_gram(gR, inv_s.cwiseAbs2());
        const Vector d = solve_spd(H, grad, opts.hessian_ridge);
        const Vector gd = gR * d;
        const double slope = grad.dot(d);
        if (!(slope > 0.0)) break;

        double t = max_domain_step(s, gd, floor);
        // Sign blocking.
        double t_sign = std::numeric_limits<double>::infinity();
        Eigen::Index blocker = -1;
        for (Eigen::Index k = 0; k < lamR.size(); ++k)
          if (sigR(k) * d(k) < 0.0) {
            const double tk = -lamR(k) / d(k);
            if (tk < t_sign) {
              t_sign = tk;
              blocker = k;
            }
          }
        const double f0 = mean_log(s) - nu * sigR.dot(lamR);
        for (int ls = 0; ls < 60 && !armijo_is_noise(slope, f0); ++ls) {
          const Vector s_try = s + t * gd;
          const double f1 = mean_log(s_try) - nu * sigR.dot(lamR + t * d);
          if (f1 >= f0 + kArmijo * t * slope) break;
          t *= 0.5;
        }
        if (blocker >= 0 && t_sign <= t) {
          lamR += t_sign * d;
          lamR(blocker) = 0.0;
          for (Eigen::Index k = 0; k < lamR.size(); ++k) lambda(R[static_cast<std::size_t>(k)]) = lamR(k);
          sigma(R[static_cast<std::size_t>(blocker)]) = 0.0;
          R.erase(R.begin() + blocker);
          s = Vector::Ones(n) + g * lambda;
          restart = true;
          break;
        }
        lamR += t * d;
        s += t * gd;
        if (lamR.cwiseAbs().maxCoeff() > kDivergence) return false;
      }
      if (!restart)
        for (Eigen::Index k = 0; k < lamR.size(); ++k) lambda(R[static_cast<std::size_t>(k)]) = lamR(k);
    }

    // Inactive coordinates: add the worst violator.
    s = Vector::Ones(n) + g * lambda;
    const Vector eta = g.transpose() * s.cwiseInverse() / static_cast<double>(n);
    Eigen::Index worst = -1;
    double worst_excess = 0.5 * opts.kkt_tol;
    for (Eigen::Index j = 0; j < r; ++j) {
      if (sigma(j) != 0.0) continue;
      const double excess = std::abs(eta(j)) - nu;
      if (excess > worst_excess) {
        worst_excess = excess;
        worst = j;
      }
    }
    if (worst < 0) return true;
    sigma(worst) = eta(worst) > 0.0 ? 1.0 : -1.0;
    R.push_back(worst);
    std::sort(R.begin(), R.end());
  }
  return false;
}

// Log-barrier interior point on lambda = a - b, a, b > 0.
Vector interior_point(const Matrix& g, double nu, const DualOptions& opts, int& iterations,
                      double& mu_out) {
  const Eigen::Index n = g.rows();
  const Eigen::Index r = g.cols();
  const double floor = domain_floor(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double gmax = g.cwiseAbs().maxCoeff();

  const double alpha0 = 0.1 / gmax;
  Vector a = Vector::Constant(r, alpha0);
  Vector b = Vector::Constant(r, alpha0);
  const double mu0 = nu * alpha0;
  double mu = mu0;

  const auto barrier_objective = [&](const Vector& aa, const Vector& bb, const Vector& ss) {
    return -mean_log(ss) + nu * (aa.sum() + bb.sum()) -
           mu * (aa.array().log().sum() + bb.array().log().sum()) -
           mu * inv_n * (ss.array() - floor).log().sum();
  };

  Vector s = Vector::Ones(n) + g * (a - b);
  while (iterations < opts.max_newton) {
    for (int step = 0; step < 50 && iterations < opts.max_newton; ++step) {
      const Vector inv_s = s.cwiseInverse();
      const Vector inv_gap = (s.array() - floor).inverse().matrix();
      const Vector eta_b = inv_n * (g.transpose() * (inv_s + mu * inv_gap));
      const Vector ga = (-eta_b.array() + nu - mu / a.array()).matrix();
      const Vector gb = (eta_b.array() + nu - mu / b.array()).matrix();
      const Vector w = (inv_s.cwiseAbs2().array() + mu * inv_gap.cwiseAbs2().array()).matrix();
      const Vector d1inv = (a.array().square() / mu).matrix();
      const Vector d2inv = (b.array().square() / mu).matrix();
      const Vector S = d1inv + d2inv;
      const Vector rhs_pre = -d1inv.cwiseProduct(ga) + d2inv.cwiseProduct(gb);
      // Solve (H + diag(1/S)) delta = rhs_pre / S with H = (1/n) g' diag(w) g.
      Vector delta, Hd;
      if (r > n) {
        // Woodbury through the n x n system I + U' diag(S) U, U = g' diag(sqrt(w / n)),
        // with iterative refinement since S spans many orders of magnitude.
        const Vector root_w = (w * inv_n).cwiseSqrt();
        const Matrix U = g.transpose() * root_w.asDiagonal();
        Matrix M = U.transpose() * S.asDiagonal() * U;
        M.diagonal().array() += 1.0;
        Eigen::LDLT<Matrix> ldlt(M);
        // K^{-1} v = S v - S U M^{-1} U' S v
        const auto apply_inverse = [&](const Vector& v) {
          const Vector Sv = S.cwiseProduct(v);
          return Vector(Sv - S.cwiseProduct(U * ldlt.solve(U.transpose() * Sv)));
        };
        const Vector rhs = S.cwiseInverse().cwiseProduct(rhs_pre);
        delta = apply_inverse(rhs);
        for (int refine = 0; refine < 5; ++refine) {
          Hd = inv_n * (g.transpose() * w.cwiseProduct(g * delta));
          const Vector residual = rhs - Hd - delta.cwiseQuotient(S);
          if (residual.cwiseAbs().maxCoeff() <= 1e-14 * rhs.cwiseAbs().maxCoeff()) break;
          delta += apply_inverse(residual);
        }
        Hd = inv_n * (g.transpose() * w.cwiseProduct(g * delta));
      } else {
        const Matrix H = weighted_gram(g, w);
        Matrix K = H;
        K.diagonal() += S.cwiseInverse();
        delta = solve_spd(K, S.cwiseInverse().cwiseProduct(rhs_pre), opts.hessian_ridge);
        Hd = H * delta;
      }
      const Vector da = d1inv.cwiseProduct(-ga - Hd);
      const Vector db = d2inv.cwiseProduct(-gb + Hd);
      const double decrement = -(ga.dot(da) + gb.dot(db));
      ++iterations;
      if (!(decrement > 0.0) || 0.5 * decrement <= 1e-3 * mu) break;

      // Step s along the multiplier change actually taken, not the solve output.
      const Vector gd = g * (da - db);
      double t = max_domain_step(s, gd, floor);
      for (Eigen::Index j = 0; j < r; ++j) {
        if (da(j) < 0.0) t = std::min(t, kBoundaryFraction * a(j) / -da(j));
        if (db(j) < 0.0) t = std::min(t, kBoundaryFraction * b(j) / -db(j));
      }
      const double f0 = barrier_objective(a, b, s);
      for (int ls = 0; ls < 60; ++ls) {
        const double f1 = barrier_objective(a + t * da, b + t * db, s + t * gd);
        if (f1 <= f0 - kArmijo * t * decrement) break;
        t *= 0.5;
      }
      a += t * da;
      b += t * db;
      s += t * gd;
    }
    if (mu <= mu0 * opts.barrier_reduction) break;
    mu *= opts.barrier_decrease;
  }
  mu_out = mu;
  return a - b;
}

// Classical EL dual (nu = 0): damped Newton on the full multiplier.
bool newton_unpenalized(const Matrix& g, Vector& lambda, const DualOptions& opts,
                        int& iterations) {
  const Eigen::Index n = g.rows();
  const double floor = domain_floor(n);
  Vector s = Vector::Ones(n) + g * lambda;
  if ((s.array() <= floor).any()) {
    lambda.setZero();
    s.setOnes();
  }
  double last_norm = std::numeric_limits<double>::infinity();
  int extra = 0;
  for (;;) {
    const Vector inv_s = s.cwiseInverse();
    const Vector grad = g.transpose() * inv_s / static_cast<double>(n);
    const double norm = grad.cwiseAbs().maxCoeff();
    if (norm <= opts.kkt_tol) {
      // Same quadratic-convergence polish as the active-set phase.
      if (extra >= opts.polish_steps || norm >= 0.1 * last_norm || iterations >= opts.max_newton) return true;
      ++extra;
    } else if (iterations >= opts.max_newton) {
      return false;
    }
    last_norm = norm;
    ++iterations;
    const Matrix H = weighted_gram(g, inv_s.cwiseAbs2());
    const Vector d = solve_spd(H, grad, opts.hessian_ridge);
    const Vector gd = g * d;
    const double slope = grad.dot(d);
    if (!(slope > 0.0)) return norm <= opts.kkt_tol;
    double t = max_domain_step(s, gd, floor);
    const double f0 = mean_log(s);
    for (int ls = 0; ls < 60 && !armijo_is_noise(slope, f0); ++ls) {
      if (mean_log(s + t * gd) >= f0 + kArmijo * t * slope) break;
      t *= 0.5;
    }
    lambda += t * d;
    s += t * gd;
    if (lambda.cwiseAbs().maxCoeff() > kDivergence)
      fail(ErrorKind::UnboundedDual,
           "EL dual is unbounded: zero is not inside the convex hull of the moments");
  }
  return false;
}

void finalize(const Matrix& g, double nu, const DualOptions& opts, DualSolution& sol) {
  const Eigen::Index n = g.rows();
  for (Eigen::Index j = 0; j < sol.lambda.size(); ++j)
    if (std::abs(sol.lambda(j)) <= opts.active_threshold) sol.lambda(j) = 0.0;
  sol.active_set.clear();
  for (Eigen::Index j = 0; j < sol.lambda.size(); ++j)
    if (sol.lambda(j) != 0.0) sol.active_set.push_back(static_cast<std::size_t>(j));
  const Vector s = Vector::Ones(n) + g * sol.lambda;
  sol.weights = (s.array() * static_cast<double>(n)).inverse().matrix();
  sol.eta = g.transpose() * s.cwiseInverse() / static_cast<double>(n);
  sol.objective = mean_log(s) - nu * sol.lambda.lpNorm<1>();
  sol.kkt_residual = kkt_residual(sol.eta, sol.lambda, nu, opts.active_threshold);
  sol.converged = sol.kkt_residual <= opts.kkt_tol && (s.array() >= domain_floor(n) * (1 - 1e-12)).all();
}

}  // namespace

Vector kkt_eta(const Matrix& g, const Vector& lambda, double active_threshold) {
  Vector lamR = lambda;
  for (Eigen::Index j = 0; j < lamR.size(); ++j)
    if (std::abs(lamR(j)) <= active_threshold) lamR(j) = 0.0;
  const Vector s = Vector::Ones(g.rows()) + g * lamR;
  return g.transpose() * s.cwiseInverse() / static_cast<double>(g.rows());
}

double kkt_residual(const Vector& eta, const Vector& lambda, double nu, double active_threshold) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    double v;
    if (std::abs(lambda(j)) > active_threshold)
      v = std::abs(eta(j) - nu * (lambda(j) > 0.0 ? 1.0 : -1.0));
    else
      v = std::max(0.0, std::abs(eta(j)) - nu);
    worst = std::max(worst, v);
  }
  return worst;
}

double dual_objective(const Matrix& g, const Vector& lambda, double nu) {
  const Vector s = Vector::Ones(g.rows()) + g * lambda;
  if ((s.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return mean_log(s) - nu * lambda.lpNorm<1>();
}

DualSolution maximize_dual(const Matrix& g, double nu, const DualOptions& opts,
                           const DualSolution* warm) {
  require(g.rows() >= 1 && g.cols() >= 1, ErrorKind::InvalidArgument,
          "maximize_dual: empty moment matrix");
  require(std::isfinite(nu) && nu >= 0.0, ErrorKind::Domain,
          "maximize_dual: nu must be finite and nonnegative");
  for (Eigen::Index t = 0; t < g.rows(); ++t)
    if (!g.row(t).allFinite())
      throw NumericalEvaluationError(static_cast<long>(t),
                                     "maximize_dual: non-finite moment at t=" + std::to_string(t));

  const Eigen::Index r = g.cols();
  DualSolution sol;
  sol.lambda = Vector::Zero(r);
  const bool warm_ok = warm != nullptr && warm->lambda.size() == r && warm->lambda.allFinite();

  if (nu == 0.0) {
    for (Eigen::Index j = 0; j < r; ++j)
      if (g.col(j).cwiseAbs().maxCoeff() == 0.0)
        fail(ErrorKind::UnboundedDual,
             "maximize_dual: moment column " + std::to_string(j) +
                 " is identically zero; the unpenalized dual has no unique maximizer");
    if (warm_ok) sol.lambda = warm->lambda;
    newton_unpenalized(g, sol.lambda, opts, sol.iterations);
    finalize(g, nu, opts, sol);
    return sol;
  }

  const Vector gbar = g.colwise().mean().transpose();
  if (gbar.cwiseAbs().maxCoeff() <= nu) {
    // 0 satisfies the subgradient condition.
    finalize(g, nu, opts, sol);
    return sol;
  }

  if (warm_ok && !warm->active_set.empty()) {
    Vector lam = warm->lambda;
    // Shrink toward 0 until the warm point is strictly inside the domain.
    const Vector glam = g * lam;
    const double floor = domain_floor(g.rows());
    double c = 1.0;
    for (Eigen::Index t = 0; t < glam.size(); ++t)
      if (glam(t) < 0.0) c = std::min(c, 0.9 * (1.0 - floor) / -glam(t));
    lam *= c;
    int it = 0;
    if (active_set_solve(g, nu, lam, opts, opts.max_newton / 2, it)) {
      sol.lambda = lam;
      sol.iterations = it;
      finalize(g, nu, opts, sol);
      if (sol.converged) return sol;
    }
    sol.iterations = it;
  }

  double mu = 0.0;
  int ip_iters = 0;
  const Vector lam_ip = interior_point(g, nu, opts, ip_iters, mu);
  sol.iterations += ip_iters;

  // Polish: drop coordinates that sit at the barrier's inactive scale.
  Vector lam = lam_ip;
  const double inactive_scale = std::max(opts.active_threshold, 10.0 * mu / nu);
  for (Eigen::Index j = 0; j < r; ++j)
    if (std::abs(lam(j)) <= inactive_scale) lam(j) = 0.0;
  int polish_iters = 0;
  const bool polished =
      active_set_solve(g, nu, lam, opts, std::max(opts.max_newton - ip_iters, 50), polish_iters);
  sol.iterations += polish_iters;
  sol.lambda = polished ? lam : lam_ip;
  finalize(g, nu, opts, sol);
  if (!sol.converged && polished) {
    sol.lambda = lam_ip;
    finalize(g, nu, opts, sol);
  }
  return sol;
}

Vector profile_gradient(const MomentModel& model, const Vector& theta,
                        const DualSolution& solution) {
  return model.weighted_vjp(theta, solution.weights, solution.lambda);
}

Vector profile_gradient(const std::vector<Matrix>& jacobians, const DualSolution& solution) {
  require(!jacobians.empty(), ErrorKind::InvalidArgument, "profile_gradient: no Jacobians");
  require(static_cast<Eigen::Index>(jacobians.size()) == solution.weights.size(),
          ErrorKind::InvalidArgument, "profile_gradient: Jacobian count differs from n");
  Vector out = Vector::Zero(jacobians.front().cols());
  for (std::size_t t = 0; t < jacobians.size(); ++t)
    out.noalias() += solution.weights(static_cast<Eigen::Index>(t)) *
                     (jacobians[t].transpose() * solution.lambda);
  return out;
}

}  // namespace pel
