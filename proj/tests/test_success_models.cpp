#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "phacklab/errors.hpp"
#include "phacklab/success_model.hpp"

using namespace phacklab;
using doctest::Approx;

TEST_CASE("success probabilities by hand") {
  const SuccessModel sm;
  const auto one = success_probs(sm, 1.0);
  CHECK(one.pA == Approx(0.25).epsilon(1e-15));
  CHECK(one.pB == Approx(0.25).epsilon(1e-15));
  CHECK(success_probs(sm, 4.0).pA == Approx(8.0 * 16.0 / 3125.0).epsilon(1e-15));
  for (double l : {1e-6, 0.3, 2.5, 1e3, 1e9}) {
    const auto p = success_probs(sm, l);
    CHECK(p.pB / p.pA == Approx(l).epsilon(1e-15));
    CHECK(p.pA == Approx(static_cast<double>(oracle::p_a(2, 3, 8, l))).epsilon(1e-13));
  }
  CHECK_THROWS_AS(success_probs(sm, 0.0), DomainError);
  CHECK_THROWS_AS(success_probs(sm, -1.0), DomainError);
}

TEST_CASE("log success matches the direct form") {
  const SuccessModel sm{4.0, 5.0, 20.0};
  for (double x : {-30.0, -2.0, 0.0, 1.5, 40.0}) {
    CHECK(log_success_a(sm, x) == Approx(std::log(static_cast<double>(oracle::p_a(4, 5, 20, std::exp(x))))).epsilon(1e-12));
  }
  CHECK(std::isfinite(log_success_a(sm, 800.0)));
}

TEST_CASE("peaks analytic and by grid") {
  const auto p = peaks(SuccessModel{});
  CHECK(p.l_a == Approx(2.0 / 3.0));
  CHECK(p.l_b == Approx(1.5));
  const auto q = peaks(SuccessModel{4.0, 5.0, 8.0});
  CHECK(q.l_a == Approx(0.8));
  CHECK(q.l_b == Approx(1.25));

  for (const SuccessModel& sm : {SuccessModel{}, SuccessModel{4.0, 5.0, 8.0}}) {
    double best_a = 0, arg_a = 0, best_b = 0, arg_b = 0;
    const int n = 20001;
    const double ratio = std::log(100.0) / (n - 1);
    for (int k = 0; k < n; ++k) {
      const double l = 0.1 * std::exp(ratio * k);
      const auto pr = success_probs(sm, l);
      if (pr.pA > best_a) best_a = pr.pA, arg_a = l;
      if (pr.pB > best_b) best_b = pr.pB, arg_b = l;
    }
    const auto pk = peaks(sm);
    CHECK(std::abs(std::log(arg_a / pk.l_a)) <= ratio);
    CHECK(std::abs(std::log(arg_b / pk.l_b)) <= ratio);
    CHECK(sup_success_a(sm) == Approx(best_a).epsilon(1e-8));
    CHECK(sup_success_b(sm) == Approx(best_b).epsilon(1e-8));
  }
}

TEST_CASE("shape properties") {
  const SuccessModel sm;
  for (double l : {1e-8, 1e8}) {
    const auto p = success_probs(sm, l);
    CHECK(p.pA < 1e-6);
    CHECK(p.pB < 1e-6);
  }
  CHECK(success_probs(sm, 1e6).pA * std::pow(1e6, 3.0) / 8.0 == Approx(1.0).epsilon(1e-3));

  const auto pk = peaks(sm);
  double prev_a = 0, prev_b = 0;
  for (int k = 0; k < 1000; ++k) {
    const double l = std::pow(10.0, -4.0 + 8.0 * k / 999.0);
    const auto p = success_probs(sm, l);
    if (k > 0) {
      if (l <= pk.l_a) CHECK(p.pA > prev_a);
      if (l > pk.l_a * 1.02) CHECK(p.pA < prev_a);
      if (l <= pk.l_b) CHECK(p.pB > prev_b);
      if (l > pk.l_b * 1.02) CHECK(p.pB < prev_b);
    }
    prev_a = p.pA;
    prev_b = p.pB;
  }
}

TEST_CASE("slope") {
  const SuccessModel sm;
  for (double l : {0.01, 2.0 / 3.0, 3.0, 1e4}) {
    const double h = 1e-7 * l;
    const double want = static_cast<double>((oracle::p_a(2, 3, 8, l + h) - oracle::p_a(2, 3, 8, l - h)) / (2 * h));
    CHECK(success_a_slope(sm, l) == Approx(want).epsilon(1e-6).scale(1e-9));
  }
}

TEST_CASE("validation") {
  CHECK(validate(SuccessModel{}, 0.5, 0.05).ok());
  CHECK(sup_success_a(SuccessModel{}) == Approx(0.2765).epsilon(1e-3));

  const auto tail = validate(SuccessModel{2.0, 0.5, 8.0}, 0.5, 0.05);
  CHECK_FALSE(tail.ok());
  CHECK(tail.has("beta"));

  const auto big = validate(SuccessModel{2.0, 3.0, 40.0}, 0.5, 0.0);
  CHECK_FALSE(big.ok());
  CHECK(big.has("kappa"));

  CHECK_FALSE(validate(SuccessModel{}, 0.0, 0.0).ok());
  CHECK_FALSE(validate(SuccessModel{}, 0.5, -0.1).ok());
  CHECK_FALSE(validate(SuccessModel{}, 0.5, 0.9).ok());
}
