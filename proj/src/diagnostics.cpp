#include "phacklab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "phacklab/errors.hpp"
#include "phacklab/golden.hpp"

namespace phacklab {

namespace {

constexpr std::size_t kSegmentGrid = 2000;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> segment_grid(const Segment& s, std::size_t n = kSegmentGrid) {
  if (s.hi <= s.lo || n < 2) return {s.lo};
  std::vector<double> out(n);
  const double a = std::log(s.lo);
  const double b = std::log(s.hi);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = k + 1 == n ? s.hi : std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  out.front() = s.lo;
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- Doob split

DoobDecomposition doob_decompose(const Trajectory& traj) {
  DoobDecomposition out;
  const std::size_t n = traj.steps.size();
  out.M.assign(n + 1, 0.0);
  out.A.assign(n + 1, 0.0);
  out.sigma_cum.assign(n + 1, 0.0);
  CompensatedSum m, a, v;
  double prev = traj.lambda0;
  for (std::size_t k = 0; k < n; ++k) {
    const StepRecord& r = traj.steps[k];
    const double drift = r.drift_base + r.drift_distortion;
    if (!std::isfinite(drift) || !std::isfinite(r.sigma_sq)) {
      throw DiagnosticsError("doob_decompose: missing drift record at t = " + std::to_string(r.t));
    }
    if (r.lambda != prev) {
      throw DiagnosticsError("doob_decompose: recorded path is not contiguous at t = " + std::to_string(r.t));
    }
    a.add(drift);
    m.add((r.lambda_next - r.lambda) - drift);
    v.add(r.sigma_sq);
    out.M[k + 1] = m.value();
    out.A[k + 1] = a.value();
    out.sigma_cum[k + 1] = v.value();
    const double err = std::abs((r.lambda_next - traj.lambda0) - (out.M[k + 1] + out.A[k + 1]));
    out.max_reconstruction_error = std::max(out.max_reconstruction_error, err);
    prev = r.lambda_next;
  }
  return out;
}

// ---------------------------------------------------------------- labels

std::string to_string(Label l) {
  switch (l) {
    case Label::Learned: return "learned";
    case Label::Failed: return "failed";
    case Label::Undecided: return "undecided";
  }
  return "undecided";
}

ConvergenceTracker::ConvergenceTracker(std::int64_t horizon, double learned_cut, std::int64_t window)
    : horizon_(horizon), cut_(learned_cut), window_(window > 0 ? window : std::max<std::int64_t>(horizon / 10, 1)) {
  out_.learned_cut = cut_;
  out_.window = window_;
  out_.window_max = -std::numeric_limits<double>::infinity();
}

void ConvergenceTracker::observe(std::int64_t t, double lambda) {
  if (!seen_) {
    out_.lambda_min = lambda;
    seen_ = true;
  }
  out_.lambda_min = std::min(out_.lambda_min, lambda);
  out_.lambda_T = lambda;
  if (lambda < cut_ / 2.0) dipped_ = true;
  if (dipped_ && lambda >= 0.0) {
    ++out_.recrossings;
    dipped_ = false;
  }
  if (t >= horizon_ - window_) out_.window_max = std::max(out_.window_max, lambda);
}

ConvergenceLabel ConvergenceTracker::finish() const {
  ConvergenceLabel l = out_;
  if (l.lambda_T < cut_ && l.window_max < cut_ / 2.0) {
    l.label = Label::Learned;
  } else if (l.recrossings > 0) {
    l.label = Label::Failed;
  } else {
    l.label = Label::Undecided;
  }
  return l;
}

ConvergenceLabel classify_convergence(const Trajectory& traj, double learned_cut, std::int64_t window) {
  const auto horizon = static_cast<std::int64_t>(traj.steps.size());
  ConvergenceTracker tr(horizon, learned_cut, window);
  tr.observe(0, traj.lambda0);
  for (const StepRecord& r : traj.steps) tr.observe(r.t + 1, r.lambda_next);
  return tr.finish();
}

// ---------------------------------------------------------------- policy range

void PolicyRange::include(double l) {
  if (l < 1.0) {
    lo_ = below_ ? Segment{std::min(lo_.lo, l), std::max(lo_.hi, l)} : Segment{l, l};
    below_ = true;
  } else if (l > 1.0) {
    hi_ = above_ ? Segment{std::min(hi_.lo, l), std::max(hi_.hi, l)} : Segment{l, l};
    above_ = true;
  } else {
    at_one_ = true;
  }
}

void PolicyRange::merge(const PolicyRange& other) {
  for (const Segment& s : other.segments()) {
    include(s.lo);
    include(s.hi);
  }
}

std::vector<Segment> PolicyRange::segments() const {
  std::vector<Segment> out;
  if (below_) out.push_back(lo_);
  if (at_one_) out.push_back({1.0, 1.0});
  if (above_) out.push_back(hi_);
  return out;
}

double PolicyRange::min() const {
  if (below_) return lo_.lo;
  if (at_one_) return 1.0;
  return hi_.lo;
}

double PolicyRange::max() const {
  if (above_) return hi_.hi;
  if (at_one_) return 1.0;
  return lo_.hi;
}

PolicyRange PolicyRange::from_points(const std::vector<double>& ls) {
  PolicyRange r;
  for (double l : ls) r.include(l);
  return r;
}

PolicyRange PolicyRange::from_table(const PolicyTable& table) {
  PolicyRange r;
  for (const PolicyRow& row : table.rows) {
    if (row.ok) r.include(row.point.l_star);
  }
  return r;
}

PolicyRange empirical_policy_range(const PayoffSpec& ps, const SuccessModel& sm, double span, double step) {
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor(span / step));
  for (long k = -n; k <= n; ++k) grid.push_back(static_cast<double>(k) * step);
  return PolicyRange::from_table(policy_table_lambda(ps, sm, grid));
}

double increment_bound(const SuccessModel& sm, double p, const PolicyRange& range) {
  double d = 0.0;
  for (const Segment& s : range.segments()) {
    for (double l : segment_grid(s)) {
      d = std::max({d, std::abs(std::log(l)), std::abs(failure_log_factor(sm, p, l))});
    }
  }
  return d;
}

double variance_bound(const SuccessModel& sm, double p, double eps, const PolicyRange& range, TrueState state) {
  double best = 0.0;
  for (const Segment& s : range.segments()) {
    const std::vector<double> grid = segment_grid(s);
    std::size_t arg = 0;
    double seg_best = -1.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double v = sigma_sq(sm, p, eps, grid[k], state);
      if (v > seg_best) {
        seg_best = v;
        arg = k;
      }
    }
    best = std::max(best, seg_best);
    if (grid.size() > 2) {
      const double a = std::log(grid[arg == 0 ? 0 : arg - 1]);
      const double b = std::log(grid[arg + 1 == grid.size() ? arg : arg + 1]);
      const auto f = [&](double x) { return sigma_sq(sm, p, eps, std::exp(x), state); };
      best = std::max(best, golden_maximize(f, a, b, 1e-10).fx);
    }
  }
  return best;
}

double max_base_drift_magnitude(const SuccessModel& sm, double p, const PolicyRange& range, TrueState state) {
  double m = 0.0;
  for (const Segment& s : range.segments()) {
    for (double l : segment_grid(s)) m = std::max(m, std::abs(drift(sm, p, 0.0, l, state).base));
  }
  return m;
}

// ---------------------------------------------------------------- thresholds

bool drift_below(const SuccessModel& sm, double p, double eps, const PolicyRange& range, double delta,
                 TrueState state) {
  for (const Segment& s : range.segments()) {
    for (double l : segment_grid(s)) {
      if (drift(sm, p, eps, l, state).total > -delta) return false;
    }
  }
  return true;
}

EpsilonThreshold epsilon_threshold(const SuccessModel& sm, double p, const PolicyRange& range, double delta,
                                   TrueState state) {
  EpsilonThreshold out;
  if (range.empty()) {
    out.diagnostic = "empty policy range";
    return out;
  }
  if (!(delta > 0.0)) {
    out.diagnostic = "delta must be positive";
    return out;
  }
  if (!drift_below(sm, p, 0.0, range, delta, state)) {
    double worst = -std::numeric_limits<double>::infinity();
    double at = 1.0;
    for (const Segment& s : range.segments()) {
      for (double l : segment_grid(s)) {
        const double b = drift(sm, p, 0.0, l, state).base;
        if (b > worst) {
          worst = b;
          at = l;
        }
      }
    }
    out.diagnostic = "delta too large: base drift " + fmt(worst) + " at l = " + fmt(at) + " is above -delta = " +
                     fmt(-delta) + " even without p-hacking";
    return out;
  }
  const double eps_max = 1.0 - (state == TrueState::A ? sup_success_a(sm) : sup_success_b(sm));
  out.ok = true;
  if (drift_below(sm, p, eps_max, range, delta, state)) {
    out.eps_bar = eps_max;
    out.diagnostic = "drift stays below -delta for every admissible eps (capped at 1 - sup p)";
    return out;
  }
  double lo = 0.0;
  double hi = eps_max;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (drift_below(sm, p, mid, range, delta, state)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.eps_bar = lo;
  out.diagnostic = lo > 0.0 ? "ok" : "no eps > 0 keeps the drift below -delta within bisection resolution";
  out.ok = lo > 0.0;
  return out;
}

EscapeThreshold escape_threshold(const PayoffSpec& ps, const SuccessModel& sm, double p, double eps, double delta,
                                 double lambda_floor, double lambda_step) {
  EscapeThreshold out;
  if (!(eps > 0.0)) {
    out.diagnostic = "eps = 0: the distortion term vanishes and no l_bar gives eps p log l_bar above the corrections";
    return out;
  }
  // Smallest grid l beyond which every grid point has total drift > delta.
  const std::vector<double> grid = segment_grid({1.0 + 1e-9, 1e30}, 3000);
  std::size_t j = grid.size();
  while (j > 0 && drift(sm, p, eps, grid[j - 1]).total > delta) --j;
  if (j == grid.size()) {
    out.diagnostic = "total drift does not exceed delta anywhere up to l = 1e30";
    return out;
  }
  out.l_bar = grid[j];

  std::vector<double> lams;
  const auto count = static_cast<long>(std::floor(-lambda_floor / lambda_step));
  for (long k = count; k >= 1; --k) lams.push_back(-static_cast<double>(k) * lambda_step);
  if (lams.empty()) {
    out.diagnostic = "lambda_floor must lie below -lambda_step";
    return out;
  }
  std::vector<double> lstar;
  for (double lam : lams) lstar.push_back(optimal_project(ps, sm, BeliefState::from_log_ratio(lam)).l_star);

  std::size_t k = 0;
  while (k < lams.size() && lstar[k] > out.l_bar) ++k;
  if (k == 0) {
    out.diagnostic = "policy is constricted: l*(" + fmt(lambda_floor) + ") = " + fmt(lstar[0]) +
                     " does not exceed l_bar = " + fmt(out.l_bar);
    return out;
  }
  // The first sample with l* <= l_bar, or the top sample if there is none.
  out.lambda_bar = k < lams.size() ? lams[k] : lams.back();
  out.sampled = k < lams.size() ? k : k - 1;
  out.min_drift_below = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.sampled; ++i) {
    out.min_drift_below = std::min(out.min_drift_below, drift(sm, p, eps, lstar[i]).total);
  }
  out.ok = true;
  out.diagnostic = k < lams.size() ? "ok" : "l* exceeds l_bar at every sampled lambda < 0";
  return out;
}

// ---------------------------------------------------------------- summaries

SummaryBuilder::SummaryBuilder(const DiagnosticsOptions& opts, std::int64_t horizon, double lambda0,
                               std::uint64_t stream)
    : opts_(opts), horizon_(horizon), tracker_(horizon, opts.learned_cut, opts.window) {
  s_.stream = stream;
  s_.lambda0 = lambda0;
  s_.m_at.assign(opts.martingale_t.size(), kNaN);
  s_.rise_at.assign(opts.azuma_t.size(), kNaN);
  s_.tau.assign(opts.nu.size(), -1);
  s_.m_tau.assign(opts.nu.size(), kNaN);
  for (std::size_t k = 0; k < opts.martingale_t.size(); ++k) {
    if (opts.martingale_t[k] == 0) s_.m_at[k] = 0.0;
  }
  for (std::size_t k = 0; k < opts.azuma_t.size(); ++k) {
    if (opts.azuma_t[k] == 0) s_.rise_at[k] = 0.0;
  }
  path_stride_ = std::max<std::int64_t>(1, horizon / std::max<std::int64_t>(opts.path_points, 1));
  tracker_.observe(0, lambda0);
  s_.path_t.push_back(0.0);
  s_.path_lambda.push_back(lambda0);
}

void SummaryBuilder::observe(const StepRecord& r) {
  const double drift_total = r.drift_base + r.drift_distortion;
  const double inc = r.lambda_next - r.lambda;
  const std::int64_t t1 = r.t + 1;

  sigma_.add(r.sigma_sq);
  for (std::size_t k = 0; k < opts_.nu.size(); ++k) {
    if (s_.tau[k] < 0 && sigma_.value() >= opts_.nu[k]) {
      s_.tau[k] = r.t;
      s_.m_tau[k] = m_.value();
    }
  }

  m_.add(inc - drift_total);
  a_.add(drift_total);
  s_.max_reconstruction_error =
      std::max(s_.max_reconstruction_error, std::abs((r.lambda_next - s_.lambda0) - (m_.value() + a_.value())));
  s_.max_abs_increment = std::max(s_.max_abs_increment, std::abs(inc));
  s_.max_drift = std::max(s_.max_drift, drift_total);
  s_.max_sigma_sq = std::max(s_.max_sigma_sq, r.sigma_sq);
  if (r.outcome == Outcome::Success) ++s_.successes;
  s_.visited.include(r.l_star);

  for (std::size_t k = 0; k < opts_.martingale_t.size(); ++k) {
    if (opts_.martingale_t[k] == t1) s_.m_at[k] = m_.value();
  }
  for (std::size_t k = 0; k < opts_.azuma_t.size(); ++k) {
    if (opts_.azuma_t[k] == t1) s_.rise_at[k] = r.lambda_next - s_.lambda0;
  }
  if (t1 % path_stride_ == 0 || t1 == horizon_) {
    s_.path_t.push_back(static_cast<double>(t1));
    s_.path_lambda.push_back(r.lambda_next);
  }
  tracker_.observe(t1, r.lambda_next);
  s_.periods = t1;
}

TrajectorySummary SummaryBuilder::finish(const RunEnd& end) {
  s_.lambda_T = end.lambda_T;
  s_.periods = end.periods;
  s_.saturated = end.saturated;
  s_.boundary_note = end.boundary_note;
  s_.sum_drift = a_.value();
  s_.sigma_cum = sigma_.value();
  for (std::size_t k = 0; k < opts_.nu.size(); ++k) {
    if (opts_.nu[k] <= 0.0) {
      s_.tau[k] = 0;
      s_.m_tau[k] = 0.0;
    }
  }
  s_.label = tracker_.finish();
  return s_;
}

TrajectorySummary summarize(const Trajectory& traj, const DiagnosticsOptions& opts) {
  const auto horizon = static_cast<std::int64_t>(traj.steps.size());
  SummaryBuilder b(opts, horizon, traj.lambda0, traj.stream);
  for (const StepRecord& r : traj.steps) b.observe(r);
  RunEnd end;
  end.lambda_T = traj.lambda_T;
  end.periods = horizon;
  end.saturated = traj.saturated;
  end.boundary_note = traj.boundary_note;
  return b.finish(end);
}

// ---------------------------------------------------------------- ensembles

std::vector<MartingaleRow> martingale_check(const std::vector<TrajectorySummary>& ens,
                                            const DiagnosticsOptions& opts) {
  std::vector<MartingaleRow> rows;
  for (std::size_t k = 0; k < opts.martingale_t.size(); ++k) {
    std::vector<double> xs;
    for (const TrajectorySummary& s : ens) {
      if (k < s.m_at.size() && std::isfinite(s.m_at[k])) xs.push_back(s.m_at[k]);
    }
    MartingaleRow row{opts.martingale_t[k], xs.size(), 0.0, 0.0, false};
    if (xs.size() >= 2) {
      const double n = static_cast<double>(xs.size());
      row.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
      double ss = 0.0;
      for (double x : xs) ss += (x - row.mean) * (x - row.mean);
      row.std_error = std::sqrt(ss / (n - 1.0) / n);
      row.within_4se = std::abs(row.mean) <= 4.0 * row.std_error;
    }
    rows.push_back(row);
  }
  return rows;
}

AzumaReport azuma_check(const std::vector<TrajectorySummary>& ens, const DiagnosticsOptions& opts, double delta,
                        double d) {
  AzumaReport rep;
  rep.delta = delta;
  rep.d = d;
  double max_drift = -std::numeric_limits<double>::infinity();
  for (const TrajectorySummary& s : ens) max_drift = std::max(max_drift, s.max_drift);
  if (!(delta > 0.0)) {
    rep.reason = "delta must be positive (largest recorded drift is " + fmt(max_drift) + ")";
    return rep;
  }
  if (max_drift > -delta) {
    rep.reason = "supermartingale precondition fails: recorded drift reaches " + fmt(max_drift) + " > -delta = " +
                 fmt(-delta);
    return rep;
  }
  rep.applicable = true;
  const double width = d + delta / 2.0;
  for (std::size_t k = 0; k < opts.azuma_t.size(); ++k) {
    const std::int64_t t = opts.azuma_t[k];
    AzumaRow row{t, 0, 0, 0.0, 0.0, 0.0, false};
    for (const TrajectorySummary& s : ens) {
      if (k >= s.rise_at.size() || std::isnan(s.rise_at[k])) continue;
      ++row.n;
      // B_t - B_0 >= delta t / 4  <=>  lambda_t - lambda_0 >= -delta t / 4
      if (s.rise_at[k] >= -delta * static_cast<double>(t) / 4.0) ++row.exceed;
    }
    row.bound = std::exp(-delta * delta * static_cast<double>(t) / (32.0 * width * width));
    if (row.n > 0) {
      row.frequency = static_cast<double>(row.exceed) / static_cast<double>(row.n);
      row.std_error = std::sqrt(row.bound * (1.0 - row.bound) / static_cast<double>(row.n));
    }
    row.violated = row.frequency > row.bound + 3.0 * row.std_error;
    rep.rows.push_back(row);
  }
  return rep;
}

double ks_distance_normal(std::vector<double> sample) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

CltReport clt_probe(const std::vector<TrajectorySummary>& ens, const DiagnosticsOptions& opts, double S) {
  CltReport rep;
  rep.S = S;
  for (std::size_t k = 0; k < opts.nu.size(); ++k) {
    const double nu = opts.nu[k];
    CltRow row{nu, 0, 0, 0.0, false, std::numeric_limits<std::int64_t>::max(), 0.0, true};
    row.tau_floor = S > 0.0 ? nu / S - 1.0 : -1.0;
    std::vector<double> z;
    for (const TrajectorySummary& s : ens) {
      if (k >= s.tau.size() || s.tau[k] < 0) {
        ++row.excluded;
        continue;
      }
      row.min_tau = std::min(row.min_tau, s.tau[k]);
      if (static_cast<double>(s.tau[k]) < row.tau_floor) row.tau_floor_ok = false;
      if (nu > 0.0) z.push_back(s.m_tau[k] / std::sqrt(nu));
    }
    row.used = ens.size() - row.excluded;
    if (row.used == 0) row.min_tau = -1;
    row.degenerate = nu <= 0.0 || z.empty();
    row.ks_distance = row.degenerate ? 1.0 : ks_distance_normal(z);
    rep.rows.push_back(row);
  }
  return rep;
}

DriftFit linear_drift_fit(const std::vector<TrajectorySummary>& ens) {
  DriftFit fit;
  std::size_t len = 0;
  for (const TrajectorySummary& s : ens) len = std::max(len, s.path_t.size());
  std::vector<double> sum(len, 0.0);
  std::size_t used = 0;
  double drift_sum = 0.0;
  double periods = 0.0;
  const std::vector<double>* ts = nullptr;
  for (const TrajectorySummary& s : ens) {
    drift_sum += s.sum_drift;
    periods += static_cast<double>(s.periods);
    if (s.path_t.size() != len) continue;  // stopped early at the boundary
    for (std::size_t i = 0; i < len; ++i) sum[i] += s.path_lambda[i];
    ts = &s.path_t;
    ++used;
  }
  if (periods > 0.0) fit.mean_drift = drift_sum / periods;
  if (used == 0 || len < 2) return fit;
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    mt += (*ts)[i];
    my += sum[i] / static_cast<double>(used);
  }
  mt /= static_cast<double>(len);
  my /= static_cast<double>(len);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double dt = (*ts)[i] - mt;
    sxy += dt * (sum[i] / static_cast<double>(used) - my);
    sxx += dt * dt;
  }
  fit.slope = sxy / sxx;
  fit.relative_gap = fit.mean_drift != 0.0 ? std::abs(fit.slope - fit.mean_drift) / std::abs(fit.mean_drift) : 0.0;
  return fit;
}

}  // namespace phacklab
