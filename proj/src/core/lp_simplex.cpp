#include "lp_simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace pel {

namespace {

class Tableau {
 public:
  // Rows 0..m-1 are constraints, row m is the reduced-cost row; the last
  // column holds the right-hand side (and minus the objective in row m).
  Tableau(const Matrix& A, const Vector& b, double tol)
      : m_(A.rows()), n_(A.cols()), tol_(tol) {
    std::vector<Eigen::Index> needs_artificial;
    for (Eigen::Index i = 0; i < m_; ++i)
      if (b(i) < 0.0) needs_artificial.push_back(i);
    n_art_ = static_cast<Eigen::Index>(needs_artificial.size());
    cols_ = n_ + m_ + n_art_;
    T_ = Matrix::Zero(m_ + 1, cols_ + 1);
    basis_.assign(static_cast<std::size_t>(m_), 0);
    Eigen::Index art = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double sign = b(i) < 0.0 ? -1.0 : 1.0;
      T_.row(i).head(n_) = sign * A.row(i);
      T_(i, n_ + i) = sign;
      T_(i, cols_) = sign * b(i);
      if (sign < 0.0) {
        T_(i, n_ + m_ + art) = 1.0;
        basis_[static_cast<std::size_t>(i)] = n_ + m_ + art;
        ++art;
      } else {
        basis_[static_cast<std::size_t>(i)] = n_ + i;
      }
    }
  }

  Eigen::Index artificial_count() const { return n_art_; }

  void set_costs(const Vector& cost) {
    T_.row(m_).setZero();
    T_.row(m_).head(cost.size()) = cost.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = basis_cost(cost, basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) T_.row(m_) -= cb * T_.row(i);
    }
  }

  // Returns Optimal, Unbounded or IterationLimit. Columns >= limit never enter.
  LpStatus run(Eigen::Index limit, int& pivots, int max_pivots) {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < limit; ++j)
        if (T_(m_, j) < -tol_) {
          enter = j;
          break;
        }
      if (enter < 0) return LpStatus::Optimal;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = T_(i, enter);
        if (a <= tol_) continue;
        const double ratio = T_(i, cols_) / a;
        if (ratio < best - tol_ ||
            (ratio <= best + tol_ && leave >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          if (ratio < best) best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      if (pivots >= max_pivots) return LpStatus::IterationLimit;
      pivot(leave, enter);
      ++pivots;
    }
  }

  // Moves artificial variables out of the basis after phase one.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_ + m_) continue;
      for (Eigen::Index j = 0; j < n_ + m_; ++j)
        if (std::abs(T_(i, j)) > tol_) {
          pivot(i, j);
          break;
        }
    }
  }

  double objective() const { return -T_(m_, cols_); }

  Vector solution() const {
    Vector x = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
      if (j < n_) x(j) = T_(i, cols_);
    }
    return x;
  }

  Eigen::Index original_columns() const { return n_ + m_; }

 private:
  double basis_cost(const Vector& cost, Eigen::Index j) const {
    return j < cost.size() ? cost(j) : 0.0;
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    T_.row(row) /= T_(row, col);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::Index m_, n_, n_art_ = 0, cols_ = 0;
  double tol_;
  Matrix T_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

LpResult simplex_minimize(const Vector& c, const Matrix& A, const Vector& b, double tol,
                          int max_pivots) {
  require(A.rows() == b.size() && A.cols() == c.size(), ErrorKind::InvalidArgument,
          "simplex: dimension mismatch");
  require(A.allFinite() && b.allFinite() && c.allFinite(), ErrorKind::Domain,
          "simplex: non-finite input");
  Tableau tab(A, b, tol);
  LpResult out;
  if (tab.artificial_count() > 0) {
    const Eigen::Index total = tab.original_columns() + tab.artificial_count();
    Vector phase1 = Vector::Zero(total);
    phase1.tail(tab.artificial_count()).setOnes();
    tab.set_costs(phase1);
    out.status = tab.run(total, out.pivots, max_pivots);
    if (out.status == LpStatus::IterationLimit) return out;
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (tab.objective() > 1e3 * tol * scale) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    tab.expel_artificials();
  }
  tab.set_costs(c);
  out.status = tab.run(tab.original_columns(), out.pivots, max_pivots);
  out.x = tab.solution();
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace pel
