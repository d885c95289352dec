// Independent reference formulas for the tests, in long double and written
// from the definitions rather than sharing code with the library.
#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <vector>

namespace oracle {

using ld = long double;

inline ld p_a(ld alpha, ld beta, ld kappa, ld l) {
  return kappa * std::pow(l, alpha) / std::pow(1.0L + l, alpha + beta);
}

inline ld p_b(ld alpha, ld beta, ld kappa, ld l) { return l * p_a(alpha, beta, kappa, l); }

/// KL divergence of the post-success belief from the prior, two-term form.
inline ld information(ld u, ld v, ld l) {
  const ld post = u / (u + v * l);
  const ld post_b = v * l / (u + v * l);
  ld kl = 0.0L;
  if (post > 0) kl += post * std::log(post / u);
  if (post_b > 0) kl += post_b * std::log(post_b / v);
  return kl;
}

inline ld information(ld u, ld l) { return information(u, 1.0L - u, l); }

inline ld information_fd(ld u, ld l) {
  const ld h = 1e-6L * l;
  return (information(u, l + h) - information(u, l - h)) / (2.0L * h);
}

struct Payoff {
  bool fast = false;
  ld c = 1.0L;
  ld gamma = 1.0L;
  ld d = 2.0L;
  ld alpha = 2.0L, beta = 3.0L, kappa = 8.0L;  // success curve the fast family inverts
};

inline ld payoff(const Payoff& p, ld i) {
  if (!p.fast) return p.c + p.gamma * (1.0L - std::exp(-i));
  const ld x = 4.0L * std::exp(2.0L * i);
  return p.c + p.d * (1.0L / p_a(p.alpha, p.beta, p.kappa, x) - 1.0L / p_a(p.alpha, p.beta, p.kappa, 4.0L));
}

inline ld expected_payoff(const Payoff& p, ld alpha, ld beta, ld kappa, ld u, ld l) {
  const ld pa = p_a(alpha, beta, kappa, l);
  return payoff(p, information(u, l)) * (u * pa + (1.0L - u) * l * pa);
}

struct Argmax {
  ld l;
  ld value;
};

/// Dense log-uniform grid scanned with `coarse` (double), then golden-section
/// refinement with `fine` (long double) around every grid-local maximum
/// within a factor 1e-6 of the best. Both take log l.
template <class Coarse, class Fine>
Argmax dense_argmax(Coarse&& coarse, Fine&& fine, ld log_lo, ld log_hi, std::size_t n) {
  std::vector<double> y(n);
  const ld step = (log_hi - log_lo) / static_cast<ld>(n - 1);
  for (std::size_t k = 0; k < n; ++k) y[k] = coarse(static_cast<double>(log_lo + step * static_cast<ld>(k)));
  double best = y[0];
  for (double v : y) best = std::max(best, v);
  Argmax out{0.0L, -1.0L};
  for (std::size_t k = 0; k < n; ++k) {
    const bool left = k == 0 || y[k] >= y[k - 1];
    const bool right = k + 1 == n || y[k] >= y[k + 1];
    if (!left || !right || y[k] < best * (1.0 - 1e-6)) continue;
    ld a = log_lo + step * static_cast<ld>(k == 0 ? 0 : k - 1);
    ld b = log_lo + step * static_cast<ld>(k + 1 == n ? k : k + 1);
    const ld g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    ld x1 = b - g * (b - a), x2 = a + g * (b - a);
    ld f1 = fine(x1), f2 = fine(x2);
    while (b - a > 1e-13L) {
      if (f1 >= f2) {
        b = x2; x2 = x1; f2 = f1;
        x1 = b - g * (b - a); f1 = fine(x1);
      } else {
        a = x1; x1 = x2; f1 = f2;
        x2 = a + g * (b - a); f2 = fine(x2);
      }
    }
    const ld xm = 0.5L * (a + b);
    const ld fm = fine(xm);
    if (fm > out.value * (1.0L + 1e-12L)) out = {std::exp(xm), fm};
  }
  return out;
}

/// Expected payoff at log l for belief weights (u, v), in precision T.
template <class T>
T expected_payoff_log(const Payoff& p, T alpha, T beta, T kappa, T u, T v, T x) {
  const T l = std::exp(x);
  const T pa = kappa * std::exp(alpha * x - (alpha + beta) * std::log1p(l));
  const T s = u + v * l;
  const T info = v * l * x / s - std::log(s);
  T pay;
  if (!p.fast) {
    pay = T(p.c) + T(p.gamma) * (T(1) - std::exp(-info));
  } else {
    const T y = std::log(T(4)) + T(2) * info;
    const T inv = std::exp((alpha + beta) * std::log1p(std::exp(y)) - alpha * y) / kappa;
    const T inv4 = std::pow(T(5), alpha + beta) / (kappa * std::pow(T(4), alpha));
    pay = T(p.c) + T(p.d) * (inv - inv4);
  }
  return pay * s * pa;
}

/// Drift of the log-ratio in state A, written as the two-branch expectation.
inline ld drift_total(ld alpha, ld beta, ld kappa, ld p, ld eps, ld l) {
  const ld pa = p_a(alpha, beta, kappa, l);
  const ld pb = l * pa;
  const ld q = p * (pa + eps);
  const ld up = std::log(l);
  const ld down = std::log((1.0L - p * pb) / (1.0L - p * pa));
  return q * up + (1.0L - q) * down;
}

inline ld normal_cdf(ld x) { return 0.5L * std::erfc(-x / std::sqrt(2.0L)); }

/// Two-sided KS statistic against the standard normal.
inline ld ks_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const ld n = static_cast<ld>(xs.size());
  ld dmax = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const ld F = normal_cdf(xs[i]);
    dmax = std::max({dmax, static_cast<ld>(i + 1) / n - F, F - static_cast<ld>(i) / n});
  }
  return dmax;
}

}  // namespace oracle
