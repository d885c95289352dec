#include "phacklab/success_model.hpp"

#include <cmath>
#include <string>

#include "phacklab/errors.hpp"
#include "phacklab/numeric.hpp"

namespace phacklab {

SuccessProbs success_probs(const SuccessModel& sm, double l) {
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw DomainError("success_probs: l must be a positive finite number, got " + std::to_string(l));
  }
  double pA;
  if (l > 1e-30 && l < 1e30) {
    pA = sm.kappa * std::pow(l, sm.alpha) / std::pow(1.0 + l, sm.alpha + sm.beta);
  } else {
    pA = std::exp(log_success_a(sm, std::log(l)));
  }
  return {pA, l * pA};
}

double log_success_a(const SuccessModel& sm, double log_l) {
  return std::log(sm.kappa) + sm.alpha * log_l - (sm.alpha + sm.beta) * softplus(log_l);
}

double success_a_slope(const SuccessModel& sm, double l) {
  const double h = l >= 1.0 ? fd_step(l) : 1e-6 * l;
  const double up = success_probs(sm, l + h).pA;
  const double dn = success_probs(sm, l - h).pA;
  return (up - dn) / (2.0 * h);
}

Peaks peaks(const SuccessModel& sm) {
  return {sm.alpha / sm.beta, (sm.alpha + 1.0) / (sm.beta - 1.0)};
}

double sup_success_a(const SuccessModel& sm) { return success_probs(sm, peaks(sm).l_a).pA; }

double sup_success_b(const SuccessModel& sm) { return success_probs(sm, peaks(sm).l_b).pB; }

ValidationResult validate(const SuccessModel& sm, double p, double eps) {
  ValidationResult r;
  const bool shape_ok = std::isfinite(sm.alpha) && sm.alpha > 0.0 && std::isfinite(sm.beta) &&
                        sm.beta > 0.0 && std::isfinite(sm.kappa) && sm.kappa > 0.0;
  if (!(std::isfinite(sm.alpha) && sm.alpha > 0.0)) r.add("alpha", "must be a positive finite number");
  if (!(std::isfinite(sm.kappa) && sm.kappa > 0.0)) r.add("kappa", "must be a positive finite number");
  if (!(std::isfinite(sm.beta) && sm.beta > 0.0)) {
    r.add("beta", "must be a positive finite number");
  } else if (!(sm.beta > 1.0)) {
    r.add("beta", "tail condition: beta must exceed 1 so that p_B(l) = l*p_A(l) vanishes as l -> inf");
  }
  if (!(std::isfinite(p) && p > 0.0 && p < 1.0)) r.add("p", "arrival probability must lie in (0,1)");
  if (!(std::isfinite(eps) && eps >= 0.0)) r.add("eps", "p-hacking intensity must be a finite number >= 0");
  if (!shape_ok || !(sm.beta > 1.0)) return r;

  const Peaks pk = peaks(sm);
  if (!(pk.l_a < 1.0)) r.add("peaks", "l_A = alpha/beta must be below 1 (needs alpha < beta)");
  if (!(pk.l_b > 1.0)) r.add("peaks", "l_B = (alpha+1)/(beta-1) must exceed 1 (needs beta < alpha + 2)");

  const double sup_a = sup_success_a(sm);
  const double sup_b = sup_success_b(sm);
  if (!(sup_a + (std::isfinite(eps) ? eps : 0.0) <= 1.0)) {
    r.add("kappa", "probability exceeds 1 near the peak: sup p_A + eps = " + std::to_string(sup_a + eps));
  }
  if (std::isfinite(p) && !(p * sup_b < 1.0)) {
    r.add("kappa", "p * sup p_B = " + std::to_string(p * sup_b) + " must stay below 1");
  }
  return r;
}

}  // namespace phacklab
