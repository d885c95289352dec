#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "phacklab/golden.hpp"
#include "phacklab/optimizer.hpp"

using namespace phacklab;
using doctest::Approx;

namespace {

const SuccessModel kSm{};
const PayoffSpec kBe = PayoffSpec::bounded_exp(1.0, 4.6);
const PayoffSpec kFr = PayoffSpec::fast_reciprocal(1.0, 2.0, kSm);

oracle::Payoff as_oracle(const PayoffSpec& ps) {
  oracle::Payoff o;
  o.fast = ps.kind == PayoffKind::FastReciprocal;
  o.c = ps.c;
  o.gamma = ps.gamma;
  o.d = ps.d;
  return o;
}

}  // namespace

TEST_CASE("golden section finds a smooth maximum") {
  const auto m = golden_maximize([](double x) { return -(x - 0.3) * (x - 0.3); }, -2.0, 5.0, 1e-10);
  CHECK(m.x == Approx(0.3).epsilon(1e-8));
}

TEST_CASE("feasible bracket") {
  const auto br = feasible_bracket(kBe, kSm, 0.5);
  CHECK(br.l_lo < br.l2);
  CHECK(br.l2 < 1.0);
  CHECK(br.l1 > 1.0);
  CHECK(br.l1 < br.l_hi);
  CHECK(std::isfinite(br.l_hi));
  CHECK(br.l1 == Approx(3.0));
  CHECK(br.l2 == Approx(1.0 / 3.0));

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> lam(-12.0, 12.0);
  for (const PayoffSpec& ps : {kBe, kFr}) {
    for (int k = 0; k < 20; ++k) {
      const auto b = BeliefState::from_log_ratio(lam(gen));
      const auto r = feasible_bracket(ps, kSm, b);
      const double top = eval_payoff(ps, {information_sup(b).max});
      const double ep1 = expected_payoff(ps, kSm, b, r.l1);
      const double ep2 = expected_payoff(ps, kSm, b, r.l2);
      CHECK(std::abs(top * success_probs(kSm, r.l_hi).pB - ep1) <= 1e-9 * ep1);
      CHECK(std::abs(top * success_probs(kSm, r.l_lo).pA - ep2) <= 1e-9 * ep2);
      for (double f : {1.5, 10.0, 1e4}) {
        CHECK(expected_payoff(ps, kSm, b, r.l_hi * f) < ep1);
        CHECK(expected_payoff(ps, kSm, b, r.l_lo / f) < ep2);
      }
    }
  }
}

TEST_CASE("optimal project against a dense grid") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> lam(-10.0, 10.0);
  for (const PayoffSpec& ps : {kBe, kFr}) {
    const auto o = as_oracle(ps);
    for (int k = 0; k < 12; ++k) {
      const auto b = BeliefState::from_log_ratio(lam(gen));
      const auto pt = optimal_project(ps, kSm, b);
      const auto ref = oracle::dense_argmax(
          [&](double x) { return oracle::expected_payoff_log<double>(o, 2, 3, 8, b.u(), b.v(), x); },
          [&](oracle::ld x) { return oracle::expected_payoff_log<oracle::ld>(o, 2, 3, 8, b.u(), b.v(), x); }, -25.0L,
          25.0L, 100000);
      CHECK(pt.l_star == Approx(static_cast<double>(ref.l)).epsilon(1e-6));
      CHECK(pt.ep_star >= static_cast<double>(ref.value) * (1.0 - 1e-9));
      CHECK(pt.l_star >= pt.bracket.l_lo);
      CHECK(pt.l_star <= pt.bracket.l_hi);
      if (pt.interior) CHECK(std::abs(pt.foc) < 1e-4);
    }
  }
}

TEST_CASE("bounded payoff near certainty") {
  const auto hi = optimal_project(kBe, kSm, 1.0 - 1e-6);
  CHECK(hi.l_star == Approx(2.0 / 3.0).epsilon(1e-3));
  CHECK(hi.ep_star == Approx(1.0 * static_cast<double>(oracle::p_a(2, 3, 8, 2.0 / 3.0))).epsilon(1e-3));
  const auto lo = optimal_project(kBe, kSm, 1e-6);
  CHECK(lo.l_star == Approx(1.5).epsilon(1e-3));
}

TEST_CASE("fast payoff policy diverges towards u = 1") {
  double prev = 0.0;
  for (int k = 2; k <= 8; ++k) {
    const double l = optimal_project(kFr, kSm, 1.0 - std::pow(10.0, -k)).l_star;
    CHECK(l > prev);
    prev = l;
  }
  CHECK(prev > 1e6);
}

TEST_CASE("first-order condition") {
  const auto b = BeliefState::from_log_ratio(-2.0);
  const auto pt = optimal_project(kBe, kSm, b);
  CHECK(std::abs(foc_residual(kBe, kSm, b, pt.l_star).relative()) < 1e-6);

  for (double l : {0.05, 0.3, 1.2, 5.0, 80.0}) {
    const double h = 1e-6 * l;
    const double grad = expected_payoff(kBe, kSm, b, l + h) - expected_payoff(kBe, kSm, b, l - h);
    const auto r = foc_residual(kBe, kSm, b, l);
    if (std::abs(grad) > 1e-14) CHECK((r.value > 0) == (grad > 0));
  }

  // Near u = 1 the information factor vanishes and the residual reduces to P(0) p_A'(l).
  const auto nb = BeliefState::from_weight(1.0 - 1e-12);
  for (double l : {0.3, 2.0}) {
    const double want = kBe.c * success_a_slope(kSm, l);
    CHECK(foc_residual(kBe, kSm, nb, l).value == Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("policy tables") {
  std::vector<double> grid;
  for (int k = 1; k <= 8; ++k) {
    grid.push_back(std::pow(10.0, -k));
    grid.push_back(1.0 - std::pow(10.0, -k));
  }
  grid.push_back(0.5);
  const auto be = policy_table(kBe, kSm, grid);
  CHECK(be.failures == 0);
  CHECK(be.l_star_max < 2.0);
  CHECK(be.l_star_min > 0.5);

  const auto fr = policy_table(kFr, kSm, grid);
  CHECK(fr.failures == 0);
  CHECK(fr.l_star_max > 1e9);

  const auto lam = policy_table_lambda(kBe, kSm, {-5.0, 0.0, 5.0});
  CHECK(lam.rows.size() == 3);
  CHECK(lam.rows[1].point.l_star < 1.0);  // tie at u = 1/2 goes to the smaller project
}

TEST_CASE("small perturbations move the policy continuously") {
  for (double u : {0.2, 0.7, 0.99}) {
    const double a = optimal_project(kBe, kSm, u).l_star;
    const double b = optimal_project(kBe, kSm, u + 1e-9).l_star;
    CHECK(std::abs(std::log(a / b)) < 1e-4);
  }
}

TEST_CASE("policy index agrees with the exact optimizer") {
  for (const PayoffSpec& ps : {kBe, kFr}) {
    PolicyIndex idx(ps, kSm);
    std::mt19937_64 gen(29);
    std::uniform_real_distribution<double> lam(-30.0, 30.0);
    for (int k = 0; k < 60; ++k) {
      const auto b = BeliefState::from_log_ratio(lam(gen));
      const double exact = optimal_project(ps, kSm, b).l_star;
      CHECK(idx.l_star(b) == Approx(exact).epsilon(1e-5));
    }
    CHECK(idx.node_count() > 0);
    // Same answer on repeat, whatever the cache state.
    const auto b = BeliefState::from_log_ratio(-7.123);
    CHECK(idx.l_star(b) == idx.l_star(b));
  }
}
