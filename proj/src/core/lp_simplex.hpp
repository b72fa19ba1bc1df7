#pragma once

#include "moments.hpp"

namespace pel {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  Vector x;
  double objective = 0.0;
  int pivots = 0;
};

// min c^T x  s.t.  A x <= b, x >= 0. Two-phase dense tableau simplex with
// Bland's rule, so it cannot cycle.
LpResult simplex_minimize(const Vector& c, const Matrix& A, const Vector& b,
                          double tol = 1e-10, int max_pivots = 100000);

}  // namespace pel
