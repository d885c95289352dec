#include "phacklab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phacklab/rng.hpp"

namespace phacklab {

std::string to_string(TrueState s) { return s == TrueState::A ? "A" : "B"; }

std::string to_string(PolicyMode m) { return m == PolicyMode::Indexed ? "indexed" : "exact"; }

Branches branches(const SuccessModel& sm, double p, double eps, double l, TrueState state) {
  const SuccessProbs pr = success_probs(sm, l);
  const double p_true = state == TrueState::A ? pr.pA : pr.pB;
  return {std::log(l), failure_log_factor(sm, p, l), p * (p_true + eps)};
}

DriftTerms drift(const SuccessModel& sm, double p, double eps, double l, TrueState state) {
  const SuccessProbs pr = success_probs(sm, l);
  const double p_true = state == TrueState::A ? pr.pA : pr.pB;
  const double log_l = std::log(l);
  const double log_f = failure_log_factor(sm, p, l);
  const double base = p * p_true * log_l + (1.0 - p * p_true) * log_f;
  const double distortion = eps * p * (log_l - log_f);
  return {base, distortion, base + distortion};
}

double drift_direct(const SuccessModel& sm, double p, double eps, double l, TrueState state) {
  const Branches br = branches(sm, p, eps, l, state);
  return br.q * br.on_success + (1.0 - br.q) * br.on_failure;
}

double sigma_sq(const SuccessModel& sm, double p, double eps, double l, TrueState state) {
  const Branches br = branches(sm, p, eps, l, state);
  const double gap = br.on_success - br.on_failure;
  return br.q * (1.0 - br.q) * gap * gap;
}

ValidationResult validate(const ScenarioConfig& cfg) {
  ValidationResult r = validate(cfg.sm, cfg.p, cfg.eps);
  r.merge(validate(cfg.ps));
  if (cfg.horizon < 0) r.add("horizon", "period count must be >= 0");
  if (!std::isfinite(cfg.lambda0)) {
    r.add("lambda0", "initial log-odds must be finite");
  } else if (std::abs(cfg.lambda0) > max_log_ratio()) {
    r.add("lambda0", "initial log-odds beyond the representable belief range");
  }
  if (cfg.true_state == TrueState::B && r.ok() && !(sup_success_b(cfg.sm) + cfg.eps <= 1.0)) {
    r.add("eps", "sup p_B + eps exceeds 1 under true state B");
  }
  return r;
}

double RngStream::uniform(std::int64_t t) const {
  return uniform01(seed, stream, static_cast<std::uint64_t>(t));
}

Simulator::Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  const ValidationResult r = validate(cfg_);
  if (!r.ok()) throw ConfigError("invalid scenario: " + r.to_string());
  if (cfg_.policy == PolicyMode::Indexed) index_ = std::make_shared<PolicyIndex>(cfg_.ps, cfg_.sm);
}

double Simulator::policy(const BeliefState& b) const {
  if (index_) return index_->l_star(b);
  return optimal_project(cfg_.ps, cfg_.sm, b).l_star;
}

StepRecord Simulator::step(const BeliefState& b, std::int64_t t, const RngStream& rng,
                           BeliefState& next) const {
  StepRecord rec;
  rec.t = t;
  rec.lambda = b.lambda();
  rec.u = b.u();
  rec.l_star = policy(b);

  const SuccessProbs pr = success_probs(cfg_.sm, rec.l_star);
  const double p_true = cfg_.true_state == TrueState::A ? pr.pA : pr.pB;
  const double log_l = std::log(rec.l_star);
  const double log_f = failure_log_factor(cfg_.sm, cfg_.p, rec.l_star);
  const double q = cfg_.p * (p_true + cfg_.eps);

  rec.drift_base = cfg_.p * p_true * log_l + (1.0 - cfg_.p * p_true) * log_f;
  rec.drift_distortion = cfg_.eps * cfg_.p * (log_l - log_f);
  rec.sigma_sq = q * (1.0 - q) * (log_l - log_f) * (log_l - log_f);

  const bool success = rng.uniform(t) < q;
  rec.outcome = success ? Outcome::Success : Outcome::NoSuccess;
  next = BeliefState::from_log_ratio(rec.lambda + (success ? log_l : log_f));
  rec.lambda_next = next.lambda();
  return rec;
}

Trajectory Simulator::simulate(std::uint64_t stream) const {
  Trajectory tr;
  tr.seed = cfg_.seed;
  tr.stream = stream;
  tr.lambda0 = cfg_.lambda0;
  tr.lambda_min = tr.lambda_max = cfg_.lambda0;
  tr.steps.reserve(static_cast<std::size_t>(std::max<std::int64_t>(cfg_.horizon, 0)));
  const RunEnd end = run(stream, [&](const StepRecord& rec) {
    tr.steps.push_back(rec);
    tr.lambda_min = std::min(tr.lambda_min, rec.lambda_next);
    tr.lambda_max = std::max(tr.lambda_max, rec.lambda_next);
  });
  tr.lambda_T = end.lambda_T;
  tr.saturated = end.saturated;
  tr.boundary_note = end.boundary_note;
  return tr;
}

std::size_t Simulator::policy_nodes() const { return index_ ? index_->node_count() : 0; }

StepRecord step(const ScenarioConfig& cfg, const BeliefState& b, const RngStream& rng, std::int64_t t,
                BeliefState& next) {
  return Simulator(cfg).step(b, t, rng, next);
}

Trajectory simulate(const ScenarioConfig& cfg) { return Simulator(cfg).simulate(0); }

}  // namespace phacklab
