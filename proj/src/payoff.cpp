#include "phacklab/payoff.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "phacklab/errors.hpp"
#include "phacklab/numeric.hpp"

namespace phacklab {

namespace {

const double kLog4 = std::log(4.0);

// log of 1 / p_A(4 e^{2i}) for the fast family.
double fast_log_reciprocal(const PayoffSpec& ps, double i) {
  return -log_success_a(ps.sm_ref, kLog4 + 2.0 * i);
}

double fast_payoff_direct(const PayoffSpec& ps, double i) {
  // Both reciprocals go through the same code path so P(0) == c bit for bit.
  const double r = std::exp(fast_log_reciprocal(ps, i));
  const double r0 = std::exp(fast_log_reciprocal(ps, 0.0));
  return ps.c + ps.d * (r - r0);
}

}  // namespace

PayoffSpec PayoffSpec::bounded_exp(double c, double gamma) {
  PayoffSpec ps;
  ps.kind = PayoffKind::BoundedExp;
  ps.c = c;
  ps.gamma = gamma;
  return ps;
}

PayoffSpec PayoffSpec::fast_reciprocal(double c, double d, const SuccessModel& sm) {
  PayoffSpec ps;
  ps.kind = PayoffKind::FastReciprocal;
  ps.c = c;
  ps.d = d;
  ps.sm_ref = sm;
  return ps;
}

std::string to_string(PayoffKind kind) {
  return kind == PayoffKind::BoundedExp ? "bounded_exp" : "fast_reciprocal";
}

ValidationResult validate(const PayoffSpec& ps) {
  ValidationResult r;
  if (!(std::isfinite(ps.c) && ps.c > 0.0)) r.add("c", "base salary must be a positive finite number");
  if (ps.kind == PayoffKind::BoundedExp) {
    if (!(std::isfinite(ps.gamma) && ps.gamma > 0.0)) r.add("gamma", "amplitude must be positive and finite");
  } else {
    if (!(std::isfinite(ps.d) && ps.d > ps.c)) r.add("d", "fast-family scale must exceed the base salary c");
    const SuccessModel& sm = ps.sm_ref;
    if (!(sm.alpha > 0.0 && sm.beta > 1.0 && sm.kappa > 0.0)) {
      r.add("sm_ref", "referenced success model needs alpha > 0, beta > 1, kappa > 0");
    } else if (!(peaks(sm).l_a < 4.0)) {
      r.add("sm_ref", "p_A must be decreasing beyond 4 for the fast family to be increasing");
    }
  }
  return r;
}

double log_payoff(const PayoffSpec& ps, double i) {
  if (ps.kind == PayoffKind::BoundedExp) {
    return std::log(ps.c - ps.gamma * std::expm1(-i));
  }
  const double nlr = fast_log_reciprocal(ps, i);
  if (nlr < 700.0) return std::log(fast_payoff_direct(ps, i));
  // P = d r (1 + (c/d - r0) / r)
  const double r0 = std::exp(fast_log_reciprocal(ps, 0.0));
  return std::log(ps.d) + nlr + std::log1p((ps.c / ps.d - r0) * std::exp(-nlr));
}

double log_payoff_slope(const PayoffSpec& ps, double i) {
  const double h = fd_step(i);
  return (log_payoff(ps, i + h) - log_payoff(ps, i - h)) / (2.0 * h);
}

double eval_payoff(const PayoffSpec& ps, InformationValue i) {
  if (!(i.nats >= 0.0)) {
    throw DomainError("eval_payoff: information must be >= 0, got " + std::to_string(i.nats));
  }
  if (std::isinf(i.nats)) {
    if (ps.kind == PayoffKind::BoundedExp) return ps.c + ps.gamma;
    throw OverflowError("eval_payoff: fast payoff is unbounded as I -> inf");
  }
  double value;
  if (ps.kind == PayoffKind::BoundedExp) {
    value = ps.c - ps.gamma * std::expm1(-i.nats);
  } else {
    value = fast_payoff_direct(ps, i.nats);
  }
  if (!std::isfinite(value)) {
    throw OverflowError("eval_payoff: fast payoff overflows at I = " + std::to_string(i.nats) +
                        " (log P = " + std::to_string(log_payoff(ps, i.nats)) + ")");
  }
  return value;
}

double log_expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b,
                           double log_l) {
  const InformationTerms t = information_terms(b, log_l);
  return log_payoff(ps, t.info) + log_success_a(sm, log_l) + t.log_mix;
}

double expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b, double l) {
  const double payoff = eval_payoff(ps, information(b, l));
  const SuccessProbs pr = success_probs(sm, l);
  const double value = payoff * (b.u() * pr.pA + b.v() * pr.pB);
  if (!std::isfinite(value)) throw OverflowError("expected_payoff: value overflows");
  return value;
}

double expected_payoff(const PayoffSpec& ps, const SuccessModel& sm, double u, double l) {
  return expected_payoff(ps, sm, BeliefState::from_weight(u), l);
}

std::string to_string(GrowthOrder order) {
  switch (order) {
    case GrowthOrder::Slower: return "slower";
    case GrowthOrder::Equivalent: return "equivalent";
    case GrowthOrder::Faster: return "faster";
    case GrowthOrder::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

GrowthComparison growth_compare(const PayoffSpec& a, const PayoffSpec& b) {
  constexpr double kSettled = 1e-6;  // |change in log ratio| between the last two stages
  constexpr double kUnit = 1e-6;     // |log limit| treated as a ratio of exactly 1

  GrowthComparison out;
  std::array<double, 3> rho{};
  for (std::size_t k = 0; k < 3; ++k) {
    rho[k] = log_payoff(a, out.stages[k]) - log_payoff(b, out.stages[k]);
    out.ratios[k] = std::exp(rho[k]);
  }
  const double d1 = rho[1] - rho[0];
  const double d2 = rho[2] - rho[1];

  auto classify_limit = [&](double log_limit) {
    if (log_limit < -kUnit) return GrowthOrder::Slower;
    if (log_limit > kUnit) return GrowthOrder::Faster;
    return GrowthOrder::Equivalent;
  };

  if (std::abs(d2) <= kSettled) {
    out.limit_estimate = out.ratios[2];
    out.order = classify_limit(rho[2]);
    out.note = "ratio settled by I = 80";
    return out;
  }
  const bool falling = d1 < 0.0 && d2 < 0.0;
  const bool rising = d1 > 0.0 && d2 > 0.0;
  if (falling && rho[2] < -kUnit) {
    // Still falling and already below 1: the limit is below 1 as well.
    out.limit_estimate = std::abs(d2) >= std::abs(d1) ? 0.0 : std::exp(rho[2] - d2 * d2 / (d2 - d1));
    out.order = GrowthOrder::Slower;
    out.note = "ratio decreasing and below 1";
    return out;
  }
  if (rising && rho[2] > kUnit) {
    out.limit_estimate = std::abs(d2) >= std::abs(d1) ? std::numeric_limits<double>::infinity()
                                                       : std::exp(rho[2] - d2 * d2 / (d2 - d1));
    out.order = GrowthOrder::Faster;
    out.note = "ratio increasing and above 1";
    return out;
  }
  if ((falling || rising) && std::abs(d2) < std::abs(d1)) {
    const double log_limit = rho[2] - d2 * d2 / (d2 - d1);  // Aitken extrapolation
    out.limit_estimate = std::exp(log_limit);
    if (std::abs(log_limit) > 10.0 * std::abs(d2)) {
      out.order = classify_limit(log_limit);
      out.note = "extrapolated limit clear of 1";
      return out;
    }
  }
  out.order = GrowthOrder::Indeterminate;
  out.note = "ratio trend does not settle between I = 20, 40, 80";
  return out;
}

}  // namespace phacklab
