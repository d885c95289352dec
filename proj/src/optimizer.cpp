#include "phacklab/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include <boost/math/tools/minima.hpp>

#include "phacklab/errors.hpp"
#include "phacklab/golden.hpp"

namespace phacklab {

namespace {

constexpr std::size_t kGridPoints = 2048;
constexpr double kRefineTol = 1e-8;   // golden bracket width in log l
constexpr double kRootTol = 1e-10;    // bisection width in log l
constexpr double kTieTol = 1e-12;     // relative EP difference treated as a tie

const double kLogFirstLimit = std::log(1e30);
const double kLogLastLimit = std::log(1e300);

// Finds the sign change of g, which is positive at x0 and eventually negative
// when moving in direction dir (+1 or -1).
template <class G>
double bracket_root(G&& g, double x0, int dir, const char* side) {
  if (!(g(x0) > 0.0)) return x0;
  double inner = x0;
  double outer = x0;
  double step = 1.0;
  bool found = false;
  for (double limit : {kLogFirstLimit, kLogLastLimit}) {
    while (std::abs(outer) < limit) {
      outer = std::clamp(inner + dir * step, -limit, limit);
      if (g(outer) <= 0.0) {
        found = true;
        break;
      }
      inner = outer;
      step *= 2.0;
    }
    if (found) break;
  }
  if (!found) {
    throw BracketError(std::string("feasible_bracket: ") + side +
                       " end not bracketed within l in [1e-300, 1e300]");
  }
  while (std::abs(outer - inner) > kRootTol) {
    const double mid = 0.5 * (inner + outer);
    if (g(mid) > 0.0) {
      inner = mid;
    } else {
      outer = mid;
    }
  }
  return outer;
}

// Picks the winner among refined maxima: best value, ties to the smallest l.
std::size_t pick_best(const std::vector<LocalMax>& cands) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (cands[k].log_ep > cands[best].log_ep) best = k;
  }
  const double top = cands[best].log_ep;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (top - cands[k].log_ep <= kTieTol && cands[k].log_l < cands[best].log_l) best = k;
  }
  return best;
}

}  // namespace

FeasibleBracket feasible_bracket(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b) {
  const Peaks pk = peaks(sm);
  FeasibleBracket br{};
  br.l1 = 2.0 * std::max(pk.l_b, 1.0);
  br.l2 = 0.5 * std::min(1.0, pk.l_a);
  const double x1 = std::log(br.l1);
  const double x2 = std::log(br.l2);
  const double log_pm = log_payoff(ps, information_sup(b).max);

  const double target_hi = log_expected_payoff(ps, sm, b, x1);
  const auto g_hi = [&](double x) { return log_pm + log_success_a(sm, x) + x - target_hi; };
  br.l_hi = std::exp(bracket_root(g_hi, x1, +1, "upper"));

  const double target_lo = log_expected_payoff(ps, sm, b, x2);
  const auto g_lo = [&](double x) { return log_pm + log_success_a(sm, x) - target_lo; };
  br.l_lo = std::exp(bracket_root(g_lo, x2, -1, "lower"));
  return br;
}

FeasibleBracket feasible_bracket(const PayoffSpec& ps, const SuccessModel& sm, double u) {
  return feasible_bracket(ps, sm, BeliefState::from_weight(u));
}

std::vector<LocalMax> local_maxima(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b,
                                   const FeasibleBracket& br, std::size_t max_count) {
  const double xa = std::log(br.l_lo);
  const double xb = std::log(br.l_hi);
  const double dx = (xb - xa) / static_cast<double>(kGridPoints - 1);
  const auto f = [&](double x) { return log_expected_payoff(ps, sm, b, x); };

  std::vector<double> xs(kGridPoints);
  std::vector<double> fs(kGridPoints);
  for (std::size_t k = 0; k < kGridPoints; ++k) {
    xs[k] = k + 1 == kGridPoints ? xb : xa + dx * static_cast<double>(k);
    fs[k] = f(xs[k]);
  }

  std::vector<std::size_t> peaks_at;
  for (std::size_t k = 0; k < kGridPoints; ++k) {
    const bool left_ok = k == 0 || fs[k] >= fs[k - 1];
    const bool right_ok = k + 1 == kGridPoints || fs[k] > fs[k + 1];
    if (left_ok && right_ok) peaks_at.push_back(k);
  }
  std::stable_sort(peaks_at.begin(), peaks_at.end(),
                   [&](std::size_t i, std::size_t j) { return fs[i] > fs[j]; });
  if (peaks_at.size() > max_count) peaks_at.resize(max_count);

  std::vector<LocalMax> out;
  for (std::size_t k : peaks_at) {
    const double lo = xs[k == 0 ? 0 : k - 1];
    const double hi = xs[k + 1 == kGridPoints ? k : k + 1];
    ScalarMax m = golden_maximize(f, lo, hi, kRefineTol);
    if (fs[k] > m.fx) m = {xs[k], fs[k]};
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const LocalMax& o) { return std::abs(o.log_l - m.x) < 1e-6; });
    if (!dup) out.push_back({m.x, m.fx});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LocalMax& a, const LocalMax& c) { return a.log_ep > c.log_ep; });
  return out;
}

PolicyPoint optimal_project(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b) {
  PolicyPoint pt;
  pt.u = b.u();
  pt.lambda = b.lambda();
  pt.bracket = feasible_bracket(ps, sm, b);
  const std::vector<LocalMax> cands = local_maxima(ps, sm, b, pt.bracket, 3);
  const std::size_t best = pick_best(cands);

  pt.l_star = std::exp(cands[best].log_l);
  pt.log_ep_star = cands[best].log_ep;
  pt.ep_star = std::exp(pt.log_ep_star);
  pt.runner_up_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (k != best) pt.runner_up_gap = std::min(pt.runner_up_gap, cands[best].log_ep - cands[k].log_ep);
  }
  const double xa = std::log(pt.bracket.l_lo);
  const double xb = std::log(pt.bracket.l_hi);
  pt.interior = cands[best].log_l - xa > kRefineTol && xb - cands[best].log_l > kRefineTol;
  pt.foc = foc_residual(ps, sm, b, pt.l_star).relative();
  return pt;
}

PolicyPoint optimal_project(const PayoffSpec& ps, const SuccessModel& sm, double u) {
  return optimal_project(ps, sm, BeliefState::from_weight(u));
}

FocResidual foc_residual(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b, double l) {
  const double u = b.u();
  const double v = b.v();
  const double s = u + v * l;
  const double info = information(b, l).nats;
  const double pa = success_probs(sm, l).pA;
  const double dpa = success_a_slope(sm, l);
  const double term1 = log_payoff_slope(ps, info) * u * v * std::log(l) / s * pa;
  const double term2 = s * dpa + v * pa;
  // s p_A / l keeps the scale away from 0 where both groups vanish (u -> 0, 1).
  return {term1 + term2, std::abs(term1) + std::abs(s * dpa) + v * pa + s * pa / l};
}

FocResidual foc_residual(const PayoffSpec& ps, const SuccessModel& sm, double u, double l) {
  return foc_residual(ps, sm, BeliefState::from_weight(u), l);
}

namespace {

template <class MakeBelief>
PolicyTable build_table(const PayoffSpec& ps, const SuccessModel& sm, const std::vector<double>& grid,
                        MakeBelief make) {
  PolicyTable table;
  table.rows.reserve(grid.size());
  bool any = false;
  for (double g : grid) {
    PolicyRow row;
    try {
      row.point = optimal_project(ps, sm, make(g));
      if (!any) {
        table.l_star_min = table.l_star_max = row.point.l_star;
        any = true;
      }
      table.l_star_min = std::min(table.l_star_min, row.point.l_star);
      table.l_star_max = std::max(table.l_star_max, row.point.l_star);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      ++table.failures;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

PolicyTable policy_table(const PayoffSpec& ps, const SuccessModel& sm, const std::vector<double>& u_grid) {
  return build_table(ps, sm, u_grid, [](double u) { return BeliefState::from_weight(u); });
}

PolicyTable policy_table_lambda(const PayoffSpec& ps, const SuccessModel& sm,
                                const std::vector<double>& lambda_grid) {
  return build_table(ps, sm, lambda_grid, [](double lam) { return BeliefState::from_log_ratio(lam); });
}

// ---------------------------------------------------------------------------

struct PolicyIndex::Impl {
  struct Node {
    std::vector<LocalMax> maxima;
    double step = 0.0;  // scan grid spacing in log l
  };

  PayoffSpec ps;
  SuccessModel sm;
  double h;
  mutable std::shared_mutex mu;
  mutable std::unordered_map<long long, Node> nodes;
  mutable std::atomic<std::size_t> fallbacks{0};

  const Node& node(long long i) const {
    {
      std::shared_lock lock(mu);
      auto it = nodes.find(i);
      if (it != nodes.end()) return it->second;
    }
    const BeliefState b = BeliefState::from_log_ratio(static_cast<double>(i) * h);
    const FeasibleBracket br = feasible_bracket(ps, sm, b);
    Node n;
    n.maxima = local_maxima(ps, sm, b, br, 3);
    n.step = (std::log(br.l_hi) - std::log(br.l_lo)) / static_cast<double>(kGridPoints - 1);
    std::unique_lock lock(mu);
    return nodes.emplace(i, std::move(n)).first->second;
  }

  double exact(const BeliefState& b) const {
    fallbacks.fetch_add(1, std::memory_order_relaxed);
    return optimal_project(ps, sm, b).l_star;
  }

  double lookup(const BeliefState& b) const {
    const double lam = b.lambda();
    const long long i0 = static_cast<long long>(std::floor(lam / h));
    const double lim = max_log_ratio();
    if (std::abs(static_cast<double>(i0) * h) > lim || std::abs(static_cast<double>(i0 + 1) * h) > lim) {
      return exact(b);
    }
    const Node& n0 = node(i0);
    const Node& n1 = node(i0 + 1);
    if (n0.maxima.size() == 1 && n1.maxima.size() == 1 &&
        std::abs(n0.maxima[0].log_l - n1.maxima[0].log_l) <= 1e-9) {
      const double t = lam / h - static_cast<double>(i0);
      return std::exp(n0.maxima[0].log_l + t * (n1.maxima[0].log_l - n0.maxima[0].log_l));
    }

    const double step = std::max(n0.step, n1.step);
    const double pad = 2.0 * step + h;
    struct Window {
      double lo, hi;
    };
    std::vector<Window> windows;
    std::vector<bool> used(n1.maxima.size(), false);
    for (const LocalMax& a : n0.maxima) {
      std::size_t near = n1.maxima.size();
      double gap = std::max(4.0 * step, 8.0 * h);
      for (std::size_t k = 0; k < n1.maxima.size(); ++k) {
        const double d = std::abs(n1.maxima[k].log_l - a.log_l);
        if (!used[k] && d <= gap) {
          gap = d;
          near = k;
        }
      }
      double lo = a.log_l;
      double hi = a.log_l;
      if (near < n1.maxima.size()) {
        used[near] = true;
        lo = std::min(lo, n1.maxima[near].log_l);
        hi = std::max(hi, n1.maxima[near].log_l);
      }
      windows.push_back({lo - pad, hi + pad});
    }
    for (std::size_t k = 0; k < n1.maxima.size(); ++k) {
      if (!used[k]) windows.push_back({n1.maxima[k].log_l - pad, n1.maxima[k].log_l + pad});
    }

    const auto neg = [&](double x) { return -log_expected_payoff(ps, sm, b, x); };
    std::vector<LocalMax> cands;
    for (const Window& w : windows) {
      std::uintmax_t iters = 100;
      const auto r = boost::math::tools::brent_find_minima(neg, w.lo, w.hi, 30, iters);
      const double margin = 1e-6 * (w.hi - w.lo);
      if (r.first - w.lo < margin || w.hi - r.first < margin) return exact(b);
      cands.push_back({r.first, -r.second});
    }
    return std::exp(cands[pick_best(cands)].log_l);
  }
};

PolicyIndex::PolicyIndex(const PayoffSpec& ps, const SuccessModel& sm, double node_spacing)
    : impl_(std::make_unique<Impl>()) {
  if (!(node_spacing > 0.0)) throw DomainError("PolicyIndex: node spacing must be positive");
  impl_->ps = ps;
  impl_->sm = sm;
  impl_->h = node_spacing;
}

PolicyIndex::~PolicyIndex() = default;

double PolicyIndex::l_star(const BeliefState& b) const { return impl_->lookup(b); }

std::size_t PolicyIndex::node_count() const {
  std::shared_lock lock(impl_->mu);
  return impl_->nodes.size();
}

std::size_t PolicyIndex::fallback_count() const { return impl_->fallbacks.load(); }

}  // namespace phacklab
