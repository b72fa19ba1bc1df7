#pragma once

#include <stdexcept>
#include <string>

namespace pel {

// Error categories. The C API maps these one-to-one onto pel_status codes.
enum class ErrorKind {
  InvalidArgument,
  Domain,
  InsufficientData,
  Configuration,
  NumericalEvaluation,
  UnboundedDual,
  InfeasibleProjection,
  SolverFailure,
  Io,
  Data,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown when g_t(theta) or its Jacobian is not finite.
class NumericalEvaluationError : public Error {
 public:
  NumericalEvaluationError(long t, const std::string& what)
      : Error(ErrorKind::NumericalEvaluation, what), t_(t) {}
  long observation() const noexcept { return t_; }

 private:
  long t_;
};

// Thrown by the projection LP when varsigma is below the smallest feasible
// sup-norm residual.
class InfeasibleProjectionError : public Error {
 public:
  InfeasibleProjectionError(double min_feasible, const std::string& what)
      : Error(ErrorKind::InfeasibleProjection, what),
        min_feasible_(min_feasible) {}
  double min_feasible_varsigma() const noexcept { return min_feasible_; }

 private:
  double min_feasible_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace pel
