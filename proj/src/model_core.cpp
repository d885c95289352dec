#include "phacklab/model_core.hpp"

#include <cfloat>
#include <cmath>
#include <string>

#include "phacklab/errors.hpp"

namespace phacklab {

namespace {

void require_weight(double u, const char* who) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError(std::string(who) + ": u must lie in (0,1), got " + std::to_string(u));
  }
}

void require_ratio(double l, const char* who) {
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw DomainError(std::string(who) + ": l must be a positive finite number, got " +
                      std::to_string(l));
  }
}

}  // namespace

double max_log_ratio() {
  static const double bound = -std::log(DBL_MIN);
  return bound;
}

BeliefState BeliefState::from_log_ratio(double lambda) {
  if (!std::isfinite(lambda)) {
    throw DomainError("belief_from_log_ratio: lambda must be finite");
  }
  if (std::abs(lambda) > max_log_ratio()) {
    throw SaturationError("belief saturated: |lambda| = " + std::to_string(std::abs(lambda)) +
                          " leaves the representable interior of (0,1)");
  }
  if (lambda <= 0.0) {
    const double e = std::exp(lambda);
    return {lambda, 1.0 / (1.0 + e), e / (1.0 + e)};
  }
  const double e = std::exp(-lambda);
  return {lambda, e / (1.0 + e), 1.0 / (1.0 + e)};
}

BeliefState BeliefState::from_weight(double u) {
  require_weight(u, "belief");
  return {std::log1p(-u) - std::log(u), u, 1.0 - u};
}

BeliefState belief_from_log_ratio(double lambda) { return BeliefState::from_log_ratio(lambda); }

InformationTerms information_terms(const BeliefState& b, double log_l) {
  const double u = b.u();
  const double v = b.v();
  const double l = std::exp(log_l);
  const double s = u + v * l;
  // s - 1 = v (l - 1) has no cancellation, so log1p is exact-ish unless s is small.
  const double log_s = s < 0.5 ? std::log(s) : std::log1p(v * (l - 1.0));
  return {v * l * log_l / s - log_s, log_s};
}

double information_from_log(const BeliefState& b, double log_l) {
  return information_terms(b, log_l).info;
}

InformationValue information(const BeliefState& b, double l) {
  require_ratio(l, "information");
  return {information_from_log(b, std::log(l))};
}

InformationValue information(double u, double l) {
  require_weight(u, "information");
  return information(BeliefState::from_weight(u), l);
}

double information_derivative(const BeliefState& b, double l) {
  require_ratio(l, "information_derivative");
  const double s = b.u() + b.v() * l;
  return b.u() * b.v() * std::log(l) / (s * s);
}

double information_derivative(double u, double l) {
  require_weight(u, "information_derivative");
  return information_derivative(BeliefState::from_weight(u), l);
}

InformationSup information_sup(const BeliefState& b) {
  const double low = -std::log(b.u());
  const double high = -std::log(b.v());
  return {low, high, std::max(low, high)};
}

InformationSup information_sup(double u) {
  require_weight(u, "information_sup");
  return information_sup(BeliefState::from_weight(u));
}

BeliefState update_on_success(const BeliefState& b, double l) {
  require_ratio(l, "update_on_success");
  return BeliefState::from_log_ratio(b.lambda() + std::log(l));
}

double failure_log_factor(const SuccessModel& sm, double p, double l) {
  const SuccessProbs pr = success_probs(sm, l);
  if (!(p * pr.pA < 1.0) || !(p * pr.pB < 1.0)) {
    throw ModelError("failure update: p*p_A(l) and p*p_B(l) must stay below 1");
  }
  return std::log1p(-p * pr.pB) - std::log1p(-p * pr.pA);
}

BeliefState update_on_failure(const BeliefState& b, double l, double p, const SuccessModel& sm) {
  require_ratio(l, "update_on_failure");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("update_on_failure: p must lie in (0,1)");
  return BeliefState::from_log_ratio(b.lambda() + failure_log_factor(sm, p, l));
}

}  // namespace phacklab
