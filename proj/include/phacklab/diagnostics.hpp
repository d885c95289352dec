#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phacklab/dynamics.hpp"
#include "phacklab/numeric.hpp"
#include "phacklab/optimizer.hpp"

namespace phacklab {

// ---------------------------------------------------------------- Doob split

struct DoobDecomposition {
  std::vector<double> M;          // martingale part, M[0] = 0
  std::vector<double> A;          // predictable part, A[0] = 0
  std::vector<double> sigma_cum;  // sigma_cum[t] = sum of sigma^2 over periods < t
  double max_reconstruction_error = 0.0;
};

/// lambda_t - lambda_0 = M_t + A_t with A's increments the recorded drift.
/// Throws DiagnosticsError if drift records are missing (NaN) or the
/// recorded path is not contiguous.
DoobDecomposition doob_decompose(const Trajectory& traj);

// ---------------------------------------------------------------- labels

enum class Label { Learned, Failed, Undecided };
std::string to_string(Label l);

struct ConvergenceLabel {
  Label label = Label::Undecided;
  double lambda_T = 0.0;
  double window_max = 0.0;   // max lambda over the final window
  double lambda_min = 0.0;
  int recrossings = 0;       // returns to lambda >= 0 after dipping below cut/2
  double learned_cut = -30.0;
  std::int64_t window = 0;
};

/// Streaming classifier over lambda_0 .. lambda_T.
///   learned:   lambda_T < cut and max over the final window < cut / 2
///   failed:    lambda dipped below cut / 2 and later came back to >= 0
///   undecided: anything else
class ConvergenceTracker {
 public:
  /// window <= 0 selects horizon / 10.
  ConvergenceTracker(std::int64_t horizon, double learned_cut, std::int64_t window);
  void observe(std::int64_t t, double lambda);
  ConvergenceLabel finish() const;

 private:
  std::int64_t horizon_;
  double cut_;
  std::int64_t window_;
  bool seen_ = false;
  bool dipped_ = false;
  ConvergenceLabel out_;
};

ConvergenceLabel classify_convergence(const Trajectory& traj, double learned_cut = -30.0,
                                      std::int64_t window = 0);

// ---------------------------------------------------------------- policy range

struct Segment {
  double lo;
  double hi;
};

/// Set of chosen projects, kept as one segment on each side of l = 1 (the
/// interval hull would contain l = 1, where drift vanishes).
class PolicyRange {
 public:
  void include(double l);
  void merge(const PolicyRange& other);
  std::vector<Segment> segments() const;
  bool empty() const { return !below_ && !above_ && !at_one_; }
  double min() const;
  double max() const;

  static PolicyRange from_points(const std::vector<double>& ls);
  static PolicyRange from_table(const PolicyTable& table);

 private:
  bool below_ = false;
  bool above_ = false;
  bool at_one_ = false;
  Segment lo_{1.0, 1.0};
  Segment hi_{1.0, 1.0};
};

/// Empirical policy range over lambda in [-span, span] (points spaced by step).
PolicyRange empirical_policy_range(const PayoffSpec& ps, const SuccessModel& sm, double span = 40.0,
                                   double step = 0.25);

/// d = max over the range of max(|log l|, |log F(l)|), bounding |lambda increments|.
double increment_bound(const SuccessModel& sm, double p, const PolicyRange& range);

/// S = max over the range of sigma_sq (grid plus golden refinement).
double variance_bound(const SuccessModel& sm, double p, double eps, const PolicyRange& range,
                      TrueState state = TrueState::A);

/// Largest base drift magnitude over a 2000-point grid per segment.
double max_base_drift_magnitude(const SuccessModel& sm, double p, const PolicyRange& range,
                                TrueState state = TrueState::A);

// ---------------------------------------------------------------- thresholds

struct EpsilonThreshold {
  double eps_bar = 0.0;
  bool ok = false;
  std::string diagnostic;
};

/// Largest eps (bisection to 1e-6) with total drift <= -delta on a 2000-point
/// geometric grid over every segment of the range.
EpsilonThreshold epsilon_threshold(const SuccessModel& sm, double p, const PolicyRange& range, double delta,
                                   TrueState state = TrueState::A);

/// True iff total drift <= -delta at every grid point of the range.
bool drift_below(const SuccessModel& sm, double p, double eps, const PolicyRange& range, double delta,
                 TrueState state = TrueState::A);

struct EscapeThreshold {
  bool ok = false;
  double lambda_bar = 0.0;
  double l_bar = 0.0;
  double min_drift_below = 0.0;  // smallest total drift at sampled lambda < lambda_bar
  std::size_t sampled = 0;
  std::string diagnostic;
};

/// l_bar: smallest grid l > 1 beyond which total drift exceeds delta.
/// lambda_bar: largest lambda with l*(lambda') > l_bar for every sampled lambda' < lambda_bar,
/// scanning lambda down to lambda_floor. Fails (ok = false) for eps = 0 and for
/// payoffs whose policy stays bounded as u -> 1.
EscapeThreshold escape_threshold(const PayoffSpec& ps, const SuccessModel& sm, double p, double eps,
                                 double delta, double lambda_floor = -60.0, double lambda_step = 0.25);

// ---------------------------------------------------------------- ensembles

struct DiagnosticsOptions {
  double learned_cut = -30.0;
  std::int64_t window = 0;  // 0: horizon / 10
  std::vector<std::int64_t> martingale_t{100, 1000, 10000};
  std::vector<std::int64_t> azuma_t{1000, 5000};
  std::vector<double> nu{50.0, 100.0, 200.0};
  double delta = 0.0;       // Azuma drift margin; 0 picks -max recorded drift
  std::int64_t path_points = 200;

  friend bool operator==(const DiagnosticsOptions&, const DiagnosticsOptions&) = default;
};

/// Everything the ensemble diagnostics need from one trajectory, so the
/// per-period records do not have to be kept.
struct TrajectorySummary {
  std::uint64_t stream = 0;
  double lambda0 = 0.0;
  double lambda_T = 0.0;
  std::int64_t periods = 0;
  bool saturated = false;
  std::string boundary_note;

  std::vector<double> m_at;          // M_t at options.martingale_t (NaN past the end)
  std::vector<double> rise_at;       // lambda_t - lambda_0 at options.azuma_t (NaN past the end)
  std::vector<std::int64_t> tau;     // tau_nu per options.nu (-1 if not reached)
  std::vector<double> m_tau;         // M at tau_nu
  std::vector<double> path_t;        // sampled times for the mean-path fit
  std::vector<double> path_lambda;

  double max_reconstruction_error = 0.0;
  double max_abs_increment = 0.0;
  double max_drift = -1e300;
  double sum_drift = 0.0;
  double max_sigma_sq = 0.0;
  double sigma_cum = 0.0;
  std::int64_t successes = 0;
  PolicyRange visited;
  ConvergenceLabel label;
};

/// Incremental Doob split and summary for one trajectory.
class SummaryBuilder {
 public:
  SummaryBuilder(const DiagnosticsOptions& opts, std::int64_t horizon, double lambda0, std::uint64_t stream);
  void observe(const StepRecord& rec);
  TrajectorySummary finish(const RunEnd& end);

 private:
  const DiagnosticsOptions& opts_;
  std::int64_t horizon_;
  TrajectorySummary s_;
  ConvergenceTracker tracker_;
  CompensatedSum m_;
  CompensatedSum a_;
  CompensatedSum sigma_;
  std::int64_t path_stride_ = 1;
};

TrajectorySummary summarize(const Trajectory& traj, const DiagnosticsOptions& opts);

struct MartingaleRow {
  std::int64_t t;
  std::size_t n;
  double mean;
  double std_error;
  bool within_4se;
};

std::vector<MartingaleRow> martingale_check(const std::vector<TrajectorySummary>& ens,
                                            const DiagnosticsOptions& opts);

struct AzumaRow {
  std::int64_t t;
  std::size_t n;
  std::size_t exceed;
  double frequency;
  double bound;
  double std_error;
  bool violated;
};

struct AzumaReport {
  bool applicable = false;
  std::string reason;
  double delta = 0.0;
  double d = 0.0;
  std::vector<AzumaRow> rows;
};

/// Compares P(B_t >= B_0 + delta t / 4), B_t = lambda_t + delta t / 2, with
/// exp(-delta^2 t / (32 (d + delta/2)^2)) at options.azuma_t. Inapplicable
/// unless every recorded drift is <= -delta.
AzumaReport azuma_check(const std::vector<TrajectorySummary>& ens, const DiagnosticsOptions& opts,
                        double delta, double d);

struct CltRow {
  double nu;
  std::size_t used;
  std::size_t excluded;   // trajectories that never reached nu
  double ks_distance;
  bool degenerate;
  std::int64_t min_tau;
  double tau_floor;       // nu / S - 1
  bool tau_floor_ok;
};

struct CltReport {
  double S = 0.0;
  std::vector<CltRow> rows;
};

/// KS distance of M_{tau_nu} / sqrt(nu) to the standard normal per nu.
CltReport clt_probe(const std::vector<TrajectorySummary>& ens, const DiagnosticsOptions& opts, double S);

/// Kolmogorov-Smirnov distance between the sample and the standard normal cdf.
double ks_distance_normal(std::vector<double> sample);

struct DriftFit {
  double slope = 0.0;          // least squares slope of the ensemble mean path
  double mean_drift = 0.0;     // mean recorded per-period drift
  double relative_gap = 0.0;   // |slope - mean_drift| / |mean_drift|
};

DriftFit linear_drift_fit(const std::vector<TrajectorySummary>& ens);

}  // namespace phacklab
