#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "phacklab/errors.hpp"
#include "phacklab/model_core.hpp"
#include "phacklab/optimizer.hpp"
#include "phacklab/payoff.hpp"
#include "phacklab/success_model.hpp"
#include "phacklab/validation.hpp"

namespace phacklab {

enum class TrueState { A, B };
enum class PolicyMode { Indexed, Exact };

std::string to_string(TrueState s);
std::string to_string(PolicyMode m);

/// One-period expected change of lambda at project l, split into the
/// no-hacking part and the part proportional to eps.
struct DriftTerms {
  double base;
  double distortion;
  double total;
};

/// The two possible lambda increments at l and the true success probability.
struct Branches {
  double on_success;  // log l
  double on_failure;  // log[(1 - p p_B) / (1 - p p_A)]
  double q;           // p (p_true(l) + eps)
};

Branches branches(const SuccessModel& sm, double p, double eps, double l, TrueState state = TrueState::A);

/// base = p p_A log l + (1 - p p_A) log F,  distortion = eps p (log l - log F),
/// with F = (1 - p p_B)/(1 - p p_A); p_A becomes p_B when the true state is B.
DriftTerms drift(const SuccessModel& sm, double p, double eps, double l, TrueState state = TrueState::A);

/// q log l + (1 - q) log F evaluated in one piece.
double drift_direct(const SuccessModel& sm, double p, double eps, double l, TrueState state = TrueState::A);

/// q (1 - q) (log l - log F)^2, the conditional variance of the increment.
double sigma_sq(const SuccessModel& sm, double p, double eps, double l, TrueState state = TrueState::A);

struct ScenarioConfig {
  double p = 0.5;
  double eps = 0.0;
  SuccessModel sm{};
  PayoffSpec ps{};
  double lambda0 = 0.0;
  std::int64_t horizon = 1000;
  std::uint64_t seed = 0;
  TrueState true_state = TrueState::A;
  PolicyMode policy = PolicyMode::Indexed;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

ValidationResult validate(const ScenarioConfig& cfg);

enum class Outcome { Success, NoSuccess };

struct StepRecord {
  std::int64_t t = 0;
  double lambda = 0.0;  // belief before the draw
  double u = 0.5;
  double l_star = 1.0;
  Outcome outcome = Outcome::NoSuccess;
  double drift_base = 0.0;
  double drift_distortion = 0.0;
  double sigma_sq = 0.0;
  double lambda_next = 0.0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double lambda0 = 0.0;
  std::vector<StepRecord> steps;
  double lambda_T = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool saturated = false;  // stopped early at the representable boundary
  std::string boundary_note;
  std::string label = "unclassified";
};

/// Where a run stopped.
struct RunEnd {
  double lambda_T = 0.0;
  std::int64_t periods = 0;
  bool saturated = false;
  std::string boundary_note;
};

/// Counter-based draw source: the uniform for period t of stream s is a pure
/// function of (seed, s, t).
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double uniform(std::int64_t t) const;
};

/// Runs trajectories for one validated scenario. Thread safe; share one
/// Simulator between workers so the policy cache is shared too.
class Simulator {
 public:
  /// Throws ConfigError listing every violation.
  explicit Simulator(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }

  /// Chosen project at belief b (the observers' undistorted belief).
  double policy(const BeliefState& b) const;

  /// One period: choose l*, draw success with probability p (p_true(l*) + eps),
  /// update with the undistorted law. Throws SaturationError if the new
  /// belief leaves the representable range.
  StepRecord step(const BeliefState& b, std::int64_t t, const RngStream& rng, BeliefState& next) const;

  /// Streams every StepRecord of one trajectory to visit(record).
  template <class Visit>
  RunEnd run(std::uint64_t stream, Visit&& visit) const;

  Trajectory simulate(std::uint64_t stream = 0) const;

  std::size_t policy_nodes() const;

 private:
  ScenarioConfig cfg_;
  std::shared_ptr<PolicyIndex> index_;
};

/// step() with a freshly built Simulator; convenient for tests.
StepRecord step(const ScenarioConfig& cfg, const BeliefState& b, const RngStream& rng, std::int64_t t,
                BeliefState& next);

/// Trajectory for stream 0 of cfg.
Trajectory simulate(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------

template <class Visit>
RunEnd Simulator::run(std::uint64_t stream, Visit&& visit) const {
  const RngStream rng{cfg_.seed, stream};
  BeliefState b = BeliefState::from_log_ratio(cfg_.lambda0);
  RunEnd end;
  for (std::int64_t t = 0; t < cfg_.horizon; ++t) {
    BeliefState next = b;
    StepRecord rec;
    try {
      rec = step(b, t, rng, next);
    } catch (const SaturationError& e) {
      end.saturated = true;
      end.boundary_note = e.what();
      break;
    }
    visit(static_cast<const StepRecord&>(rec));
    b = next;
    ++end.periods;
  }
  end.lambda_T = b.lambda();
  return end;
}

}  // namespace phacklab
