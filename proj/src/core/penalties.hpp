#pragma once

namespace pel {

enum class PenaltyKind { Scad, Lasso };

// P_tau(t) for t >= 0. tau is pi for the parameter penalty and nu for the
// multiplier penalty.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Lasso;
  double tau = 1.0;
  double scad_a = 3.7;

  static PenaltySpec scad(double tau, double a = 3.7);
  static PenaltySpec lasso(double tau);
};

// Throws on tau <= 0 or scad_a <= 2.
void validate(const PenaltySpec& spec);

double penalty_value(const PenaltySpec& spec, double t);

// P'_tau(t); at t == 0 returns the 0+ limit.
double penalty_deriv(const PenaltySpec& spec, double t);

// argmin_u (u - v)^2 / (2 step) + P_tau(|u|). Exact for every step > 0,
// including the nonconvex SCAD regime step >= a - 1. Ties go to the smaller
// |u|.
double prox_step(const PenaltySpec& spec, double v, double step);

}  // namespace pel
