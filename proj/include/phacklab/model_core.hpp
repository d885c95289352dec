#pragma once

#include "phacklab/success_model.hpp"

namespace phacklab {

/// Public belief over the two states.
///
/// The log-likelihood ratio lambda = log((1-u)/u) of B over A is the primary
/// coordinate; both weights u (on A) and v = 1-u (on B) are derived from it
/// separately so neither loses precision when |lambda| is large. A belief is
/// valid while the smaller weight is a normal double (|lambda| below ~708).
class BeliefState {
 public:
  /// Throws DomainError for non-finite lambda, SaturationError past the boundary.
  static BeliefState from_log_ratio(double lambda);
  /// Throws DomainError unless 0 < u < 1.
  static BeliefState from_weight(double u);

  double lambda() const { return lambda_; }
  double u() const { return u_; }
  double v() const { return v_; }

 private:
  BeliefState(double lambda, double u, double v) : lambda_(lambda), u_(u), v_(v) {}

  double lambda_;
  double u_;
  double v_;
};

BeliefState belief_from_log_ratio(double lambda);

/// Largest |lambda| for which both weights are normal doubles.
double max_log_ratio();

/// KL divergence (nats) between posterior and prior beliefs.
struct InformationValue {
  double nats = 0.0;
};

/// I(u,l) = (1-u) l log l / (u + (1-u) l) - log(u + (1-u) l).
InformationValue information(double u, double l);
InformationValue information(const BeliefState& b, double l);

/// Same quantity from log l; used by the optimizer which works in log-l.
double information_from_log(const BeliefState& b, double log_l);

/// I(u,l) together with log(u + (1-u) l), the log of the success-probability
/// mixing weight; both fall out of the same intermediate terms.
struct InformationTerms {
  double info;
  double log_mix;
};
InformationTerms information_terms(const BeliefState& b, double log_l);

/// dI/dl = u (1-u) log l / (u + (1-u) l)^2.
double information_derivative(double u, double l);
double information_derivative(const BeliefState& b, double l);

struct InformationSup {
  double sup_low;   // limit l -> 0:   -log u
  double sup_high;  // limit l -> inf: -log(1-u)
  double max;
};

InformationSup information_sup(double u);
InformationSup information_sup(const BeliefState& b);

/// Likelihood ratio (B over A) multiplied by l: lambda' = lambda + log l.
BeliefState update_on_success(const BeliefState& b, double l);

/// log[(1 - p p_B(l)) / (1 - p p_A(l))], the log-ratio shift after a failure.
/// Throws ModelError when either p p_A(l) or p p_B(l) reaches 1.
double failure_log_factor(const SuccessModel& sm, double p, double l);

/// lambda' = lambda + failure_log_factor(sm, p, l).
BeliefState update_on_failure(const BeliefState& b, double l, double p, const SuccessModel& sm);

}  // namespace phacklab
