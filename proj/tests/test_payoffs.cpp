#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "phacklab/errors.hpp"
#include "phacklab/model_core.hpp"
#include "phacklab/payoff.hpp"

using namespace phacklab;
using doctest::Approx;

namespace {

const SuccessModel kSm{};

oracle::Payoff as_oracle(const PayoffSpec& ps) {
  oracle::Payoff o;
  o.fast = ps.kind == PayoffKind::FastReciprocal;
  o.c = ps.c;
  o.gamma = ps.gamma;
  o.d = ps.d;
  return o;
}

}  // namespace

TEST_CASE("base salary") {
  for (const PayoffSpec& ps : {PayoffSpec::bounded_exp(1.0, 1.0), PayoffSpec::bounded_exp(2.5, 4.6),
                               PayoffSpec::fast_reciprocal(1.0, 2.0, kSm), PayoffSpec::fast_reciprocal(0.3, 7.0, kSm)}) {
    CHECK(eval_payoff(ps, {0.0}) == ps.c);
  }
}

TEST_CASE("bounded family approaches c + gamma from below") {
  const auto ps = PayoffSpec::bounded_exp(1.0, 1.0);
  double prev = 0.0;
  for (double i : {1.0, 5.0, 20.0, 40.0, 1e3}) {
    const double v = eval_payoff(ps, {i});
    CHECK(v <= 2.0);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(eval_payoff(ps, {40.0}) == Approx(2.0).epsilon(1e-15));
  CHECK(eval_payoff(ps, {30.0}) < 2.0 + 1e-12);
}

TEST_CASE("fast family times p_A(4 e^(2i)) tends to d") {
  const auto ps = PayoffSpec::fast_reciprocal(1.0, 2.0, kSm);
  const auto pr = success_probs(kSm, 4.0 * std::exp(20.0));
  CHECK(std::abs(pr.pA * eval_payoff(ps, {10.0}) - 2.0) < 1e-3);
  CHECK(eval_payoff(ps, {30.0}) > 1e30);
  CHECK_THROWS_AS(eval_payoff(ps, {1e4}), OverflowError);
  CHECK_THROWS_AS(eval_payoff(ps, {-1.0}), DomainError);
}

TEST_CASE("payoff values match the oracle and increase") {
  for (const PayoffSpec& ps : {PayoffSpec::bounded_exp(1.0, 4.6), PayoffSpec::fast_reciprocal(1.0, 3.0, kSm)}) {
    const auto o = as_oracle(ps);
    double prev = -1.0;
    for (int k = 0; k < 1000; ++k) {
      const double i = 12.0 * k / 999.0;
      const double v = eval_payoff(ps, {i});
      CHECK(v > prev);
      CHECK(v == Approx(static_cast<double>(oracle::payoff(o, i))).epsilon(1e-11));
      CHECK(log_payoff(ps, i) == Approx(std::log(v)).epsilon(1e-12));
      prev = v;
    }
  }
}

TEST_CASE("expected payoff") {
  const auto be = PayoffSpec::bounded_exp(1.0, 4.6);
  const auto fr = PayoffSpec::fast_reciprocal(1.0, 2.0, kSm);

  const double la = 2.0 / 3.0;
  const double limit = 1.0 * static_cast<double>(oracle::p_a(2, 3, 8, la));
  CHECK(expected_payoff(be, kSm, 1.0 - 1e-9, la) == Approx(limit).epsilon(1e-6));

  for (double u : {0.01, 0.5, 0.97}) {
    CHECK(expected_payoff(be, kSm, u, 1.0) == Approx(0.25).epsilon(1e-15));
    CHECK(expected_payoff(fr, kSm, u, 1.0) == Approx(0.25).epsilon(1e-15));
  }

  // Spreadsheet-style: the three factors evaluated separately.
  const double i = static_cast<double>(oracle::information(0.5, 2.0));
  const double pa = static_cast<double>(oracle::p_a(2, 3, 8, 2.0));
  const double want = (1.0 + 4.6 * (1.0 - std::exp(-i))) * (0.5 * pa + 0.5 * 2.0 * pa);
  CHECK(expected_payoff(be, kSm, 0.5, 2.0) == Approx(want).epsilon(1e-13));

  const auto b = BeliefState::from_log_ratio(-3.0);
  CHECK(std::exp(log_expected_payoff(fr, kSm, b, std::log(50.0))) ==
        Approx(expected_payoff(fr, kSm, b, 50.0)).epsilon(1e-12));
}

TEST_CASE("growth comparison") {
  const auto be = PayoffSpec::bounded_exp(1.0, 1.0);
  const auto f2 = PayoffSpec::fast_reciprocal(1.0, 2.0, kSm);
  const auto f3 = PayoffSpec::fast_reciprocal(1.0, 3.0, kSm);
  CHECK(growth_compare(be, f2).order == GrowthOrder::Slower);
  CHECK(growth_compare(f2, be).order == GrowthOrder::Faster);
  CHECK(growth_compare(be, be).order == GrowthOrder::Equivalent);
  const auto g = growth_compare(f2, f3);
  CHECK(g.order == GrowthOrder::Slower);
  CHECK(g.ratios[2] == Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(growth_compare(PayoffSpec::bounded_exp(1.0, 4.6), PayoffSpec::bounded_exp(1.0, 1.0)).order ==
        GrowthOrder::Faster);
}

TEST_CASE("payoff validation") {
  CHECK(validate(PayoffSpec::bounded_exp(1.0, 4.6)).ok());
  CHECK_FALSE(validate(PayoffSpec::bounded_exp(0.0, 1.0)).ok());
  CHECK_FALSE(validate(PayoffSpec::bounded_exp(1.0, -1.0)).ok());
  CHECK_FALSE(validate(PayoffSpec::fast_reciprocal(1.0, 0.5, kSm)).ok());
  CHECK(validate(PayoffSpec::fast_reciprocal(1.0, 2.0, kSm)).ok());
}
