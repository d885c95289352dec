#pragma once

#include "phacklab/validation.hpp"

namespace phacklab {

/// Bell-shaped success curves
///
///   p_A(l) = kappa * l^alpha / (1 + l)^(alpha + beta),   p_B(l) = l * p_A(l).
///
/// p_A peaks at alpha/beta, p_B at (alpha+1)/(beta-1). Both vanish at 0 and
/// at infinity when beta > 1; the tail of p_A is kappa * l^-beta.
struct SuccessModel {
  double alpha = 2.0;
  double beta = 3.0;
  double kappa = 8.0;

  friend bool operator==(const SuccessModel&, const SuccessModel&) = default;
};

struct SuccessProbs {
  double pA;
  double pB;
};

struct Peaks {
  double l_a;
  double l_b;
};

/// Throws DomainError for l <= 0 or non-finite l.
SuccessProbs success_probs(const SuccessModel& sm, double l);

/// log p_A as a function of log l; finite for every finite log_l.
double log_success_a(const SuccessModel& sm, double log_l);

/// d p_A / d l by central differences (step 1e-6 * max(1, l) for l >= 1,
/// 1e-6 * l below 1 so the stencil stays inside (0, inf)).
double success_a_slope(const SuccessModel& sm, double l);

Peaks peaks(const SuccessModel& sm);

double sup_success_a(const SuccessModel& sm);
double sup_success_b(const SuccessModel& sm);

/// Checks the shape assumptions and that every success probability stays
/// below one for arrival probability p and p-hacking intensity eps.
ValidationResult validate(const SuccessModel& sm, double p, double eps);

}  // namespace phacklab
