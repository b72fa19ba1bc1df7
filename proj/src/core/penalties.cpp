#include "penalties.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace pel {

PenaltySpec PenaltySpec::scad(double tau, double a) {
  return PenaltySpec{PenaltyKind::Scad, tau, a};
}

PenaltySpec PenaltySpec::lasso(double tau) {
  return PenaltySpec{PenaltyKind::Lasso, tau, 3.7};
}

void validate(const PenaltySpec& spec) {
  require(std::isfinite(spec.tau) && spec.tau > 0.0, ErrorKind::Domain,
          "penalty tau must be positive, got " + std::to_string(spec.tau));
  if (spec.kind == PenaltyKind::Scad)
    require(spec.scad_a > 2.0, ErrorKind::Domain,
            "SCAD constant a must exceed 2, got " + std::to_string(spec.scad_a));
}

double penalty_value(const PenaltySpec& spec, double t) {
  require(t >= 0.0, ErrorKind::Domain, "penalty argument must be nonnegative");
  const double tau = spec.tau;
  if (spec.kind == PenaltyKind::Lasso) return tau * t;

  const double a = spec.scad_a;
  if (t <= tau) return tau * t;
  if (t <= a * tau)
    return (2.0 * a * tau * t - t * t - tau * tau) / (2.0 * (a - 1.0));
  return 0.5 * (a + 1.0) * tau * tau;
}

double penalty_deriv(const PenaltySpec& spec, double t) {
  require(t >= 0.0, ErrorKind::Domain, "penalty argument must be nonnegative");
  const double tau = spec.tau;
  if (spec.kind == PenaltyKind::Lasso) return tau;

  const double a = spec.scad_a;
  if (t <= tau) return tau;
  if (t <= a * tau) return (a * tau - t) / (a - 1.0);
  return 0.0;
}

namespace {

double soft_threshold(double v, double thresh) {
  if (v > thresh) return v - thresh;
  if (v < -thresh) return v + thresh;
  return 0.0;
}

// SCAD prox on |v| (sign restored by the caller). Each zone of P is a
// quadratic in u, so the prox objective restricted to a zone is minimized
// either at its clipped stationary point or at a zone endpoint; compare all
// candidates.
double scad_prox_magnitude(double x, double tau, double a, double step) {
  const auto objective = [&](double u) {
    return (u - x) * (u - x) / (2.0 * step) +
           penalty_value(PenaltySpec::scad(tau, a), u);
  };

  std::array<double, 7> cand{};
  std::size_t nc = 0;
  cand[nc++] = 0.0;
  cand[nc++] = tau;
  cand[nc++] = a * tau;
  // Zone [0, tau]: linear penalty.
  cand[nc++] = std::clamp(x - step * tau, 0.0, tau);
  // Zone [tau, a tau]: curvature 1/step - 1/(a-1).
  const double curv = 1.0 / step - 1.0 / (a - 1.0);
  if (curv > 0.0) {
    const double u = (x / step - a * tau / (a - 1.0)) / curv;
    cand[nc++] = std::clamp(u, tau, a * tau);
  }
  // Zone [a tau, inf): constant penalty.
  cand[nc++] = std::max(x, a * tau);

  double best_u = 0.0;
  double best_val = objective(0.0);
  for (std::size_t i = 1; i < nc; ++i) {
    const double val = objective(cand[i]);
    if (val < best_val || (val == best_val && cand[i] < best_u)) {
      best_val = val;
      best_u = cand[i];
    }
  }
  return best_u;
}

}  // namespace

double prox_step(const PenaltySpec& spec, double v, double step) {
  require(step > 0.0, ErrorKind::Domain, "prox step must be positive");
  if (spec.kind == PenaltyKind::Lasso) return soft_threshold(v, step * spec.tau);

  const double mag = scad_prox_magnitude(std::abs(v), spec.tau, spec.scad_a, step);
  return v < 0.0 ? -mag : mag;
}

}  // namespace pel
