#pragma once

#include <cmath>

namespace phacklab {

struct ScalarMax {
  double x;
  double fx;
};

/// Golden-section maximization of a unimodal f on [a, b], stopping once the
/// bracket is narrower than tol. Returns the best point evaluated.
template <class F>
ScalarMax golden_maximize(F&& f, double a, double b, double tol) {
  static const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? ScalarMax{c, fc} : ScalarMax{d, fd};
}

}  // namespace phacklab
