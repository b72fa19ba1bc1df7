#pragma once

// Independent reference computations. Nothing here calls into the library.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace pel::oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Root of (1/n) sum g_t / (1 + lam g_t) = nu sign(lam) by bisection on the
// interval where 1 + lam g_t >= 1/n.
inline double scalar_el_multiplier(const Vector& g, double nu = 0.0) {
  const double n = static_cast<double>(g.size());
  if (std::abs(g.mean()) <= nu) return 0.0;
  auto eta = [&](double lam) { return (g.array() / (1.0 + lam * g.array())).mean(); };
  const double floor = 1.0 / n;
  double lo = -1e300, hi = 1e300;
  for (Eigen::Index t = 0; t < g.size(); ++t) {
    if (g(t) > 0) lo = std::max(lo, (floor - 1.0) / g(t));
    if (g(t) < 0) hi = std::min(hi, (floor - 1.0) / g(t));
  }
  const double target = g.mean() > 0 ? nu : -nu;
  double a = g.mean() > 0 ? 0.0 : lo;
  double b = g.mean() > 0 ? hi : 0.0;
  for (int it = 0; it < 400; ++it) {
    const double m = 0.5 * (a + b);
    if (eta(m) > target) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

// Optimal value of min |u|_1 s.t. |Gt u - xi|_inf <= s (Gt is p x r),
// computed through the dual program
//   max xi^T w - s |w|_1  s.t. |Gt^T w|_inf <= 1
// with a single-phase tableau simplex and Dantzig's largest-coefficient
// rule. The origin is feasible for the dual, so no phase one is needed.
// Returns nullopt when the dual is unbounded (primal infeasible).
inline std::optional<double> projection_l1_value(const Matrix& Gt, const Vector& xi, double s) {
  const Eigen::Index p = Gt.rows(), r = Gt.cols();
  const Eigen::Index nv = 2 * p, nc = 2 * r;
  // maximize c^T x, A x <= 1, x = (w+, w-) >= 0
  Matrix A(nc, nv);
  A << Gt.transpose(), -Gt.transpose(), -Gt.transpose(), Gt.transpose();
  Vector c(nv);
  c << xi.array() - s, -xi.array() - s;
  Matrix T = Matrix::Zero(nc + 1, nv + nc + 1);
  T.topLeftCorner(nc, nv) = A;
  T.block(0, nv, nc, nc).setIdentity();
  T.col(nv + nc).head(nc).setOnes();
  T.row(nc).head(nv) = -c.transpose();
  for (int iter = 0; iter < 20000; ++iter) {
    Eigen::Index enter;
    const double most = T.row(nc).head(nv + nc).minCoeff(&enter);
    if (most >= -1e-12) return T(nc, nv + nc);
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nc; ++i)
      if (T(i, enter) > 1e-12 && T(i, nv + nc) / T(i, enter) < best) {
        best = T(i, nv + nc) / T(i, enter);
        leave = i;
      }
    if (leave < 0) return std::nullopt;
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i <= nc; ++i)
      if (i != leave) T.row(i) -= T(i, enter) * T.row(leave);
  }
  return std::nullopt;
}

// Direct enumeration of sum_{j=-(n-1)}^{n-1} K(j/h) (1/n) sum_t f_t f_{t-j}
// for a scalar series with the Parzen kernel.
inline double parzen_hac_scalar(const std::vector<double>& f, double h) {
  auto parzen = [](double x) {
    x = std::abs(x);
    if (x <= 0.5) return 1.0 - 6.0 * x * x + 6.0 * x * x * x;
    if (x <= 1.0) return 2.0 * (1.0 - x) * (1.0 - x) * (1.0 - x);
    return 0.0;
  };
  const long n = static_cast<long>(f.size());
  double total = 0.0;
  for (long j = -(n - 1); j <= n - 1; ++j) {
    double Hj = 0.0;
    for (long t = 0; t < n; ++t) {
      const long s = t - j;
      if (s >= 0 && s < n) Hj += f[static_cast<std::size_t>(t)] * f[static_cast<std::size_t>(s)];
    }
    total += parzen(static_cast<double>(j) / h) * Hj / static_cast<double>(n);
  }
  return total;
}

// Generalized variance decomposition for d = 2, h = 2, expanded by hand:
// the l = 0 term uses Sigma, the l = 1 term uses G Sigma.
inline Matrix vardecomp_2x2_h2(const Matrix& G, const Matrix& S) {
  const Matrix GS = G * S;
  Matrix D(2, 2);
  for (int i = 0; i < 2; ++i) {
    const double denom = S(i, i) + (G.row(i) * S * G.row(i).transpose())(0, 0);
    for (int j = 0; j < 2; ++j) {
      const double num = S(i, j) * S(i, j) + GS(i, j) * GS(i, j);
      D(i, j) = num / S(j, j) / denom;
    }
    const double row = D(i, 0) + D(i, 1);
    D(i, 0) /= row;
    D(i, 1) /= row;
  }
  return D;
}

}  // namespace pel::oracle
