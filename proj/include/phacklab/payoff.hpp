#pragma once

#include <array>
#include <string>

#include "phacklab/model_core.hpp"
#include "phacklab/success_model.hpp"
#include "phacklab/validation.hpp"

namespace phacklab {

enum class PayoffKind { BoundedExp, FastReciprocal };

/// Payoff P(I) paid on success, as a function of the information I.
///
///   BoundedExp:     P(I) = c + gamma (1 - e^-I)                       (bounded by c + gamma)
///   FastReciprocal: P(I) = c + d ([p_A(4 e^{2I})]^-1 - [p_A(4)]^-1)   (grows like e^{2 beta I})
///
/// Both satisfy P(0) = c exactly. The fast family keeps
/// p_A(4 e^{2I}) P(I) -> d > c, which is what makes contrarian projects pay.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::BoundedExp;
  double c = 1.0;
  double gamma = 1.0;      // BoundedExp only
  double d = 2.0;          // FastReciprocal only
  SuccessModel sm_ref{};   // FastReciprocal inverts this model's p_A

  static PayoffSpec bounded_exp(double c, double gamma);
  static PayoffSpec fast_reciprocal(double c, double d, const SuccessModel& sm);

  friend bool operator==(const PayoffSpec&, const PayoffSpec&) = default;
};

std::string to_string(PayoffKind kind);

ValidationResult validate(const PayoffSpec& ps);

/// P(i). Throws DomainError for i < 0 and OverflowError when P(i) is not a finite double.
double eval_payoff(const PayoffSpec& ps, InformationValue i);

/// log P(i), finite wherever i is finite. Also defined slightly below 0 so
/// central differences at i = 0 work.
double log_payoff(const PayoffSpec& ps, double i);

/// d log P / dI by central differences with step 1e-6 * max(1, |i|).
double log_payoff_slope(const PayoffSpec& ps, double i);

/// P(I(u,l)) [u p_A(l) + (1-u) p_B(l)]. Throws OverflowError if not finite.
double expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, double u, double l);
double expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b, double l);

/// log of expected_payoff as a function of log l; the optimizer's objective.
double log_expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b,
                           double log_l);

enum class GrowthOrder { Slower, Equivalent, Faster, Indeterminate };

std::string to_string(GrowthOrder order);

struct GrowthComparison {
  GrowthOrder order = GrowthOrder::Indeterminate;
  std::array<double, 3> stages{20.0, 40.0, 80.0};
  std::array<double, 3> ratios{};  // P_first(I) / P_second(I) at each stage
  double limit_estimate = 0.0;
  std::string note;
};

/// Orders two payoffs by lim P_a(I)/P_b(I): below 1 is "slower", 1 is
/// "equivalent", above 1 is "faster". The limit is estimated from the ratio
/// at I = 20, 40, 80; a trend that neither settles nor moves monotonically
/// away from 1 is reported as Indeterminate.
GrowthComparison growth_compare(const PayoffSpec& a, const PayoffSpec& b);

}  // namespace phacklab
