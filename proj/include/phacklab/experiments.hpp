#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phacklab/diagnostics.hpp"
#include "phacklab/dynamics.hpp"

namespace phacklab {

inline constexpr const char* kVersion = "0.1.0";

struct OutputOptions {
  bool write_trajectories = true;
  std::int64_t trajectory_stride = 1;

  friend bool operator==(const OutputOptions&, const OutputOptions&) = default;
};

struct AcceptanceOptions {
  std::optional<double> learned_fraction_min;
  std::optional<double> learned_fraction_max;

  friend bool operator==(const AcceptanceOptions&, const AcceptanceOptions&) = default;
};

struct ThresholdOptions {
  double epsilon_delta = 0.0;  // 0: half the largest base drift over the policy range
  double escape_delta = 0.01;
  double range_span = 40.0;    // lambda span of the empirical policy range

  friend bool operator==(const ThresholdOptions&, const ThresholdOptions&) = default;
};

struct SweepPayoff {
  std::string label;
  PayoffSpec ps;

  friend bool operator==(const SweepPayoff&, const SweepPayoff&) = default;
};

struct SweepOptions {
  std::vector<SweepPayoff> payoffs;
  double lambda_min = -20.0;
  double lambda_max = 20.0;
  double lambda_step = 0.5;
  std::vector<int> boundary_k;  // adds u = 1 - 10^-k and u = 10^-k

  friend bool operator==(const SweepOptions&, const SweepOptions&) = default;
};

/// Parsed scenario file; see docs/config.md for the schema.
struct ExperimentConfig {
  std::string name = "scenario";
  ScenarioConfig scenario{};
  std::uint64_t seed_count = 1;
  DiagnosticsOptions diagnostics{};
  ThresholdOptions thresholds{};
  AcceptanceOptions acceptance{};
  OutputOptions output{};
  std::optional<SweepOptions> sweep;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError whose message lists every offending field, one per line.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Full echo with every default filled in; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// 8 hex digits of FNV-1a over the canonical config dump.
std::string config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// %.17g formatting (17 significant digits, trailing zeros dropped); round-trips every double.
std::string format_double(double x);

/// Trajectory CSV: header, one row per period (every stride-th), and a
/// terminal row with lambda_T and blank per-period fields.
class TrajectoryCsv {
 public:
  explicit TrajectoryCsv(std::int64_t stride = 1);
  void add(const StepRecord& rec);
  void finish(std::int64_t t_end, double lambda_T);
  const std::string& text() const { return buf_; }

 private:
  std::int64_t stride_;
  std::string buf_;
};

std::string trajectory_csv(const Trajectory& traj, std::int64_t stride = 1);

struct RunOptions {
  unsigned workers = 1;
  std::filesystem::path out_base = "out";
  std::uint64_t seed_offset = 0;
  bool write_files = true;
  /// Called with (stream, csv bytes) for each trajectory when set.
  std::function<void(std::uint64_t, const std::string&)> on_trajectory_csv;
};

struct SeedResult {
  std::uint64_t stream = 0;
  bool ok = true;
  std::string error;
  TrajectorySummary summary;
};

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json manifest;
  nlohmann::json diagnostics;
  std::vector<SeedResult> seeds;
  double learned_fraction = 0.0;
  bool acceptance_declared = false;
  bool acceptance_passed = true;
  std::vector<std::string> acceptance_messages;
};

/// Simulates every seed, writes trajectories, aggregate.csv, diagnostics.json
/// and manifest.json under out_base/<name>-<hash>-<timestamp>/.
RunResult run_scenario(const ExperimentConfig& cfg, const RunOptions& opts);

/// Ensemble diagnostics JSON for a finished set of seeds.
nlohmann::json diagnostics_report(const ExperimentConfig& cfg, const std::vector<SeedResult>& seeds);

struct SweepResult {
  std::filesystem::path dir;
  nlohmann::json manifest;
  std::vector<PolicyTable> tables;  // one per payoff, same order as the config
};

/// Policy tables per declared payoff: policy_<label>.csv plus sweep_summary.json.
SweepResult run_policy_sweep(const ExperimentConfig& cfg, const RunOptions& opts);

/// Beliefs visited by a sweep in ascending u.
std::vector<BeliefState> sweep_beliefs(const SweepOptions& sw);

void write_policy_csv(std::ostream& os, const PolicyTable& table);

enum class PlotKind { LambdaPaths, DriftProfile, PolicyCurve, AzumaTable };
std::optional<PlotKind> parse_plot_kind(const std::string& s);
std::string to_string(PlotKind k);

/// Writes plot_<kind>.csv next to the manifest and returns its path.
std::filesystem::path emit_plotdata(const std::filesystem::path& manifest_path, PlotKind kind);

/// Re-simulates the run described by a manifest and writes diagnose.json.
nlohmann::json diagnose(const std::filesystem::path& manifest_path, unsigned workers);

/// Runs fn(i) for i in [0, n) on `workers` threads.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace phacklab
