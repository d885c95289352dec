#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "phacklab/model_core.hpp"
#include "phacklab/payoff.hpp"
#include "phacklab/success_model.hpp"

namespace phacklab {

/// Compact set of candidate projects outside which no l can be optimal.
struct FeasibleBracket {
  double l_lo;
  double l_hi;
  double l1;  // anchor above max(l_B, 1)
  double l2;  // anchor below min(1, l_A)
};

/// Anchors l1 = 2 max(l_B, 1) and l2 = min(1, l_A) / 2; the ends solve
/// P(m(u)) p_B(l_hi) = EP(u, l1) and P(m(u)) p_A(l_lo) = EP(u, l2).
/// Throws BracketError when a root lies beyond 1e300 (or below 1e-300).
FeasibleBracket feasible_bracket(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b);
FeasibleBracket feasible_bracket(const PayoffSpec& ps, const SuccessModel& sm, double u);

struct PolicyPoint {
  double u = 0.0;
  double lambda = 0.0;
  double l_star = 1.0;
  double ep_star = 0.0;       // may be +inf for the fast family at extreme beliefs
  double log_ep_star = 0.0;
  double foc = 0.0;           // relative FOC residual at l_star
  double runner_up_gap = 0.0; // log EP gap to the next local maximum (inf if none)
  bool interior = true;       // false when l_star sits on a bracket end
  FeasibleBracket bracket{};
};

/// Grid scan over the bracket (2048 geometric points), golden-section refinement
/// of the three best local maxima to 1e-8 in log l, ties within 1e-12 relative
/// broken towards the smallest l.
PolicyPoint optimal_project(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b);
PolicyPoint optimal_project(const PayoffSpec& ps, const SuccessModel& sm, double u);

/// First-order condition of EP in l, divided by P(I) so it stays finite for
/// fast payoffs:
///   (P'/P)(I) u(1-u) log l / (u+(1-u)l) p_A(l) + (u+(1-u)l) p_A'(l) + (1-u) p_A(l)
/// scale adds the magnitudes of the three pieces and s p_A(l) / l, so
/// relative() is close to d log EP / d log l.
struct FocResidual {
  double value;
  double scale;
  double relative() const { return scale > 0.0 ? value / scale : 0.0; }
};

FocResidual foc_residual(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b, double l);
FocResidual foc_residual(const PayoffSpec& ps, const SuccessModel& sm, double u, double l);

struct PolicyRow {
  PolicyPoint point;
  bool ok = true;
  std::string error;
};

struct PolicyTable {
  std::vector<PolicyRow> rows;
  double l_star_min = 0.0;
  double l_star_max = 0.0;
  std::size_t failures = 0;
};

/// One row per u in grid order; failed rows carry the error text.
PolicyTable policy_table(const PayoffSpec& ps, const SuccessModel& sm, const std::vector<double>& u_grid);

/// Same, over log-odds values.
PolicyTable policy_table_lambda(const PayoffSpec& ps, const SuccessModel& sm,
                                const std::vector<double>& lambda_grid);

/// A refined local maximum of log EP over log l.
struct LocalMax {
  double log_l;
  double log_ep;
};

/// Up to max_count refined local maxima inside the bracket, best first.
std::vector<LocalMax> local_maxima(const PayoffSpec& ps, const SuccessModel& sm, const BeliefState& b,
                                   const FeasibleBracket& br, std::size_t max_count = 3);

/// Memoized policy for trajectory simulation.
///
/// Full scans are done at nodes lambda = i * h and cached. A query between two
/// nodes refines each local maximum found at either node with Brent's method
/// in a window around it, which costs tens of evaluations instead of
/// thousands. Nodes depend only on (ps, sm, i), so answers are independent of
/// query order and thread count. Thread safe.
class PolicyIndex {
 public:
  PolicyIndex(const PayoffSpec& ps, const SuccessModel& sm, double node_spacing = 1.0 / 32.0);
  ~PolicyIndex();
  PolicyIndex(const PolicyIndex&) = delete;
  PolicyIndex& operator=(const PolicyIndex&) = delete;

  /// l_star at the given belief.
  double l_star(const BeliefState& b) const;

  std::size_t node_count() const;
  std::size_t fallback_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace phacklab
