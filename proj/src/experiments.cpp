#include "phacklab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "phacklab/errors.hpp"

namespace phacklab {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

/// Walks one JSON object, recording every problem instead of stopping at the first.
class Reader {
 public:
  Reader(const json* j, std::string path, std::vector<std::string>* errs)
      : j_(j), path_(std::move(path)), errs_(errs) {}

  bool present() const { return j_ != nullptr; }

  bool require_object() {
    if (j_ && !j_->is_object()) {
      fail("", "must be an object");
      j_ = nullptr;
    }
    return j_ != nullptr;
  }

  void allow(std::initializer_list<const char*> keys) {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        fail(it.key(), "unknown key");
      }
    }
  }

  bool has(const char* key) const { return j_ && j_->contains(key); }

  Reader child(const char* key) {
    Reader r(has(key) ? &(*j_)[key] : nullptr, join(key), errs_);
    r.require_object();
    return r;
  }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = (*j_)[key];
    if (!v.is_number()) return fail(key, "must be a number");
    out = v.get<double>();
  }

  template <class Int>
  void integer(const char* key, Int& out) {
    if (!has(key)) return;
    const json& v = (*j_)[key];
    if (v.is_number_unsigned()) {
      const auto x = v.get<std::uint64_t>();
      if (std::is_signed_v<Int> && x > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
        return fail(key, "out of range");
      }
      out = static_cast<Int>(x);
    } else if (v.is_number_integer()) {
      const auto x = v.get<std::int64_t>();
      if (std::is_unsigned_v<Int> && x < 0) return fail(key, "must be >= 0");
      out = static_cast<Int>(x);
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
               std::abs(v.get<double>()) < 9e15) {
      const double x = v.get<double>();
      if (std::is_unsigned_v<Int> && x < 0) return fail(key, "must be >= 0");
      out = static_cast<Int>(x);
    } else {
      fail(key, "must be an integer");
    }
  }

  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = (*j_)[key];
    if (!v.is_string()) return fail(key, "must be a string");
    out = v.get<std::string>();
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = (*j_)[key];
    if (!v.is_boolean()) return fail(key, "must be true or false");
    out = v.get<bool>();
  }

  template <class T, class Fn>
  void list(const char* key, std::vector<T>& out, Fn&& convert) {
    if (!has(key)) return;
    const json& v = (*j_)[key];
    if (!v.is_array()) return fail(key, "must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T x{};
      if (!convert(v[i], x)) return fail(key, "element " + std::to_string(i) + " has the wrong type");
      out.push_back(x);
    }
  }

  const json* raw(const char* key) const { return has(key) ? &(*j_)[key] : nullptr; }

  void fail(const std::string& key, const std::string& msg) { errs_->push_back(join(key) + ": " + msg); }

  std::string join(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json* j_;
  std::string path_;
  std::vector<std::string>* errs_;
};

bool to_int64(const json& v, std::int64_t& x) {
  if (!v.is_number_integer()) return false;
  x = v.get<std::int64_t>();
  return true;
}

bool to_int(const json& v, int& x) {
  if (!v.is_number_integer()) return false;
  x = v.get<int>();
  return true;
}

bool to_double(const json& v, double& x) {
  if (!v.is_number()) return false;
  x = v.get<double>();
  return true;
}

PayoffSpec read_payoff(Reader r, const SuccessModel& sm, std::string* label) {
  PayoffSpec ps = PayoffSpec::bounded_exp(1.0, 4.6);
  std::string kind = "bounded_exp";
  r.string("kind", kind);
  if (label) r.string("label", *label);
  if (kind == "bounded_exp") {
    if (label) r.allow({"label", "kind", "c", "gamma"});
    else r.allow({"kind", "c", "gamma"});
    r.number("c", ps.c);
    r.number("gamma", ps.gamma);
  } else if (kind == "fast_reciprocal") {
    if (label) r.allow({"label", "kind", "c", "d"});
    else r.allow({"kind", "c", "d"});
    ps = PayoffSpec::fast_reciprocal(1.0, 2.0, sm);
    r.number("c", ps.c);
    r.number("d", ps.d);
  } else {
    r.fail("kind", "must be \"bounded_exp\" or \"fast_reciprocal\", got \"" + kind + "\"");
  }
  for (const Violation& v : validate(ps).violations) r.fail(v.field, v.message);
  return ps;
}

json payoff_json(const PayoffSpec& ps) {
  json j;
  j["kind"] = to_string(ps.kind);
  j["c"] = ps.c;
  if (ps.kind == PayoffKind::BoundedExp) {
    j["gamma"] = ps.gamma;
  } else {
    j["d"] = ps.d;
  }
  return j;
}

std::string section_of(const std::string& field) {
  if (field == "alpha" || field == "beta" || field == "kappa" || field == "peaks") return "model." + field;
  if (field == "c" || field == "gamma" || field == "d" || field == "sm_ref") return "payoff." + field;
  return "dynamics." + field;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errs;
  ExperimentConfig cfg;
  cfg.scenario.ps = PayoffSpec::bounded_exp(1.0, 4.6);
  Reader top(&j, "", &errs);
  if (!top.require_object()) throw ConfigError("config: top level must be a JSON object");
  top.allow({"name", "model", "payoff", "dynamics", "seeds", "diagnostics", "thresholds", "acceptance", "output",
             "sweep"});

  top.string("name", cfg.name);
  static const std::regex kName("[A-Za-z0-9_.-]+");
  if (!std::regex_match(cfg.name, kName)) top.fail("name", "must be non-empty and use only [A-Za-z0-9_.-]");

  Reader model = top.child("model");
  model.allow({"alpha", "beta", "kappa"});
  model.number("alpha", cfg.scenario.sm.alpha);
  model.number("beta", cfg.scenario.sm.beta);
  model.number("kappa", cfg.scenario.sm.kappa);

  std::size_t before_payoff = errs.size();
  if (top.has("payoff")) {
    Reader pr = top.child("payoff");
    if (pr.present()) cfg.scenario.ps = read_payoff(pr, cfg.scenario.sm, nullptr);
  }
  const bool payoff_ok = errs.size() == before_payoff;

  Reader dyn = top.child("dynamics");
  dyn.allow({"p", "eps", "lambda0", "horizon", "true_state", "policy"});
  dyn.number("p", cfg.scenario.p);
  dyn.number("eps", cfg.scenario.eps);
  dyn.number("lambda0", cfg.scenario.lambda0);
  dyn.integer("horizon", cfg.scenario.horizon);
  std::string state = "A";
  dyn.string("true_state", state);
  if (state == "A") {
    cfg.scenario.true_state = TrueState::A;
  } else if (state == "B") {
    cfg.scenario.true_state = TrueState::B;
  } else {
    dyn.fail("true_state", "must be \"A\" or \"B\"");
  }
  std::string policy = "indexed";
  dyn.string("policy", policy);
  if (policy == "indexed") {
    cfg.scenario.policy = PolicyMode::Indexed;
  } else if (policy == "exact") {
    cfg.scenario.policy = PolicyMode::Exact;
  } else {
    dyn.fail("policy", "must be \"indexed\" or \"exact\"");
  }

  Reader seeds = top.child("seeds");
  seeds.allow({"seed", "count"});
  seeds.integer("seed", cfg.scenario.seed);
  seeds.integer("count", cfg.seed_count);
  if (cfg.seed_count < 1) seeds.fail("count", "must be >= 1");

  Reader diag = top.child("diagnostics");
  diag.allow({"learned_cut", "window", "delta", "azuma_t", "nu", "martingale_t", "path_points"});
  DiagnosticsOptions& d = cfg.diagnostics;
  diag.number("learned_cut", d.learned_cut);
  diag.integer("window", d.window);
  diag.number("delta", d.delta);
  diag.list("azuma_t", d.azuma_t, to_int64);
  diag.list("nu", d.nu, to_double);
  diag.list("martingale_t", d.martingale_t, to_int64);
  diag.integer("path_points", d.path_points);
  if (!(d.learned_cut < 0.0)) diag.fail("learned_cut", "must be negative");
  if (d.window < 0) diag.fail("window", "must be >= 0 (0 selects horizon / 10)");
  if (!(d.delta >= 0.0)) diag.fail("delta", "must be >= 0 (0 derives it from the recorded drift)");
  if (d.path_points < 1) diag.fail("path_points", "must be >= 1");
  for (auto t : d.azuma_t) {
    if (t < 1) diag.fail("azuma_t", "times must be >= 1");
  }
  for (auto t : d.martingale_t) {
    if (t < 0) diag.fail("martingale_t", "times must be >= 0");
  }
  for (double nu : d.nu) {
    if (!(nu >= 0.0)) diag.fail("nu", "variance levels must be >= 0");
  }

  Reader thr = top.child("thresholds");
  thr.allow({"epsilon_delta", "escape_delta", "range_span"});
  thr.number("epsilon_delta", cfg.thresholds.epsilon_delta);
  thr.number("escape_delta", cfg.thresholds.escape_delta);
  thr.number("range_span", cfg.thresholds.range_span);
  if (!(cfg.thresholds.epsilon_delta >= 0.0)) thr.fail("epsilon_delta", "must be >= 0");
  if (!(cfg.thresholds.escape_delta > 0.0)) thr.fail("escape_delta", "must be > 0");
  if (!(cfg.thresholds.range_span > 0.0 && cfg.thresholds.range_span <= 700.0)) {
    thr.fail("range_span", "must lie in (0, 700]");
  }

  Reader acc = top.child("acceptance");
  acc.allow({"learned_fraction_min", "learned_fraction_max"});
  for (const char* key : {"learned_fraction_min", "learned_fraction_max"}) {
    if (!acc.has(key)) continue;
    double x = 0.0;
    acc.number(key, x);
    if (!(x >= 0.0 && x <= 1.0)) acc.fail(key, "must lie in [0, 1]");
    (std::string(key) == "learned_fraction_min" ? cfg.acceptance.learned_fraction_min
                                                : cfg.acceptance.learned_fraction_max) = x;
  }

  Reader out = top.child("output");
  out.allow({"write_trajectories", "trajectory_stride"});
  out.boolean("write_trajectories", cfg.output.write_trajectories);
  out.integer("trajectory_stride", cfg.output.trajectory_stride);
  if (cfg.output.trajectory_stride < 1) out.fail("trajectory_stride", "must be >= 1");

  if (top.has("sweep")) {
    Reader sw = top.child("sweep");
    sw.allow({"payoffs", "lambda_min", "lambda_max", "lambda_step", "boundary_k"});
    SweepOptions s;
    sw.number("lambda_min", s.lambda_min);
    sw.number("lambda_max", s.lambda_max);
    sw.number("lambda_step", s.lambda_step);
    sw.list("boundary_k", s.boundary_k, to_int);
    if (!(s.lambda_step > 0.0)) sw.fail("lambda_step", "must be > 0");
    if (!(s.lambda_min <= s.lambda_max)) sw.fail("lambda_min", "must not exceed lambda_max");
    if (!(std::abs(s.lambda_min) <= 700.0 && std::abs(s.lambda_max) <= 700.0)) {
      sw.fail("lambda_min", "lambda range must stay within [-700, 700]");
    }
    for (int k : s.boundary_k) {
      if (k < 1 || k > 15) sw.fail("boundary_k", "entries must lie in [1, 15]");
    }
    const json* pays = sw.raw("payoffs");
    if (!pays || !pays->is_array() || pays->empty()) {
      sw.fail("payoffs", "must be a non-empty array of payoff objects");
    } else {
      for (std::size_t i = 0; i < pays->size(); ++i) {
        Reader pr(&(*pays)[i], sw.join("payoffs[" + std::to_string(i) + "]"), &errs);
        if (!pr.require_object()) continue;
        SweepPayoff sp;
        sp.label = "payoff" + std::to_string(i);
        sp.ps = read_payoff(pr, cfg.scenario.sm, &sp.label);
        if (!std::regex_match(sp.label, kName)) pr.fail("label", "must use only [A-Za-z0-9_.-]");
        for (const SweepPayoff& o : s.payoffs) {
          if (o.label == sp.label) pr.fail("label", "duplicate label \"" + sp.label + "\"");
        }
        s.payoffs.push_back(sp);
      }
    }
    cfg.sweep = s;
  }

  {
    for (const Violation& v : validate(cfg.scenario).violations) {
      const std::string f = section_of(v.field);
      if (f.rfind("payoff.", 0) == 0 && !payoff_ok) continue;  // already reported
      errs.push_back(f + ": " + v.message);
    }
  }

  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  json j;
  j["name"] = cfg.name;
  j["model"] = {{"alpha", s.sm.alpha}, {"beta", s.sm.beta}, {"kappa", s.sm.kappa}};
  j["payoff"] = payoff_json(s.ps);
  j["dynamics"] = {{"p", s.p},
                   {"eps", s.eps},
                   {"lambda0", s.lambda0},
                   {"horizon", s.horizon},
                   {"true_state", to_string(s.true_state)},
                   {"policy", to_string(s.policy)}};
  j["seeds"] = {{"seed", s.seed}, {"count", cfg.seed_count}};
  const DiagnosticsOptions& d = cfg.diagnostics;
  j["diagnostics"] = {{"learned_cut", d.learned_cut}, {"window", d.window},         {"delta", d.delta},
                      {"azuma_t", d.azuma_t},         {"nu", d.nu},                 {"martingale_t", d.martingale_t},
                      {"path_points", d.path_points}};
  j["thresholds"] = {{"epsilon_delta", cfg.thresholds.epsilon_delta},
                     {"escape_delta", cfg.thresholds.escape_delta},
                     {"range_span", cfg.thresholds.range_span}};
  j["acceptance"] = json::object();
  if (cfg.acceptance.learned_fraction_min) j["acceptance"]["learned_fraction_min"] = *cfg.acceptance.learned_fraction_min;
  if (cfg.acceptance.learned_fraction_max) j["acceptance"]["learned_fraction_max"] = *cfg.acceptance.learned_fraction_max;
  j["output"] = {{"write_trajectories", cfg.output.write_trajectories},
                 {"trajectory_stride", cfg.output.trajectory_stride}};
  if (cfg.sweep) {
    json pays = json::array();
    for (const SweepPayoff& sp : cfg.sweep->payoffs) {
      json pj = payoff_json(sp.ps);
      pj["label"] = sp.label;
      pays.push_back(pj);
    }
    j["sweep"] = {{"payoffs", pays},
                  {"lambda_min", cfg.sweep->lambda_min},
                  {"lambda_max", cfg.sweep->lambda_max},
                  {"lambda_step", cfg.sweep->lambda_step},
                  {"boundary_k", cfg.sweep->boundary_k}};
  }
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << (fnv1a64(to_json(cfg).dump()) & 0xffffffffULL);
  return os.str();
}

// ---------------------------------------------------------------- CSV

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

namespace {

void append_double(std::string& out, double x) {
  if (!std::isfinite(x)) {
    out += format_double(x);
    return;
  }
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  out.append(buf, r.ptr);
}

const char* kTrajectoryHeader = "t,lambda,u,l_star,outcome,drift_base,drift_distortion,sigma_sq\n";

}  // namespace

TrajectoryCsv::TrajectoryCsv(std::int64_t stride) : stride_(std::max<std::int64_t>(stride, 1)) {
  buf_ = kTrajectoryHeader;
}

void TrajectoryCsv::add(const StepRecord& r) {
  if (r.t % stride_ != 0) return;
  buf_ += std::to_string(r.t);
  buf_ += ',';
  append_double(buf_, r.lambda);
  buf_ += ',';
  append_double(buf_, r.u);
  buf_ += ',';
  append_double(buf_, r.l_star);
  buf_ += r.outcome == Outcome::Success ? ",success," : ",no-success,";
  append_double(buf_, r.drift_base);
  buf_ += ',';
  append_double(buf_, r.drift_distortion);
  buf_ += ',';
  append_double(buf_, r.sigma_sq);
  buf_ += '\n';
}

void TrajectoryCsv::finish(std::int64_t t_end, double lambda_T) {
  buf_ += std::to_string(t_end);
  buf_ += ',';
  append_double(buf_, lambda_T);
  buf_ += ',';
  append_double(buf_, BeliefState::from_log_ratio(lambda_T).u());
  buf_ += ",,terminal,,,\n";
}

std::string trajectory_csv(const Trajectory& traj, std::int64_t stride) {
  TrajectoryCsv csv(stride);
  for (const StepRecord& r : traj.steps) csv.add(r);
  csv.finish(static_cast<std::int64_t>(traj.steps.size()), traj.lambda_T);
  return csv.text();
}

void write_policy_csv(std::ostream& os, const PolicyTable& table) {
  os << "u,lambda,l_star,ep_star,foc_residual\n";
  for (const PolicyRow& row : table.rows) {
    if (!row.ok) continue;
    const PolicyPoint& p = row.point;
    os << format_double(p.u) << ',' << format_double(p.lambda) << ',' << format_double(p.l_star) << ','
       << format_double(p.ep_star) << ',' << format_double(p.foc) << '\n';
  }
}

// ---------------------------------------------------------------- helpers

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

namespace {

std::string utc_stamp(std::chrono::system_clock::time_point tp, const char* format) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& base, const ExperimentConfig& cfg, const std::string& stamp) {
  const std::string stem = cfg.name + "-" + config_hash(cfg) + "-" + stamp;
  fs::create_directories(base);
  fs::path dir = base / stem;
  for (int k = 1; fs::exists(dir); ++k) dir = base / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string seed_file(std::uint64_t stream) {
  std::ostringstream os;
  os << "trajectories/seed_" << std::setw(5) << std::setfill('0') << stream << ".csv";
  return os.str();
}

json segments_json(const PolicyRange& r) {
  json a = json::array();
  for (const Segment& s : r.segments()) a.push_back({s.lo, s.hi});
  return a;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

}  // namespace

// ---------------------------------------------------------------- diagnostics

json diagnostics_report(const ExperimentConfig& cfg, const std::vector<SeedResult>& seeds) {
  const ScenarioConfig& sc = cfg.scenario;
  const DiagnosticsOptions& opts = cfg.diagnostics;
  std::vector<TrajectorySummary> ens;
  for (const SeedResult& s : seeds) {
    if (s.ok) ens.push_back(s.summary);
  }

  json rep;
  rep["config"] = to_json(cfg);
  rep["trajectories"] = ens.size();

  double max_rec = 0.0;
  double max_drift = -std::numeric_limits<double>::infinity();
  std::size_t counts[3] = {0, 0, 0};
  std::size_t saturated = 0;
  PolicyRange visited;
  for (const TrajectorySummary& s : ens) {
    max_rec = std::max(max_rec, s.max_reconstruction_error);
    max_drift = std::max(max_drift, s.max_drift);
    ++counts[static_cast<int>(s.label.label)];
    if (s.saturated) ++saturated;
    visited.merge(s.visited);
  }
  rep["decomposition"] = {{"max_reconstruction_error", max_rec}, {"tolerance", 1e-10}, {"ok", max_rec <= 1e-10}};
  const std::int64_t window = opts.window > 0 ? opts.window : std::max<std::int64_t>(sc.horizon / 10, 1);
  rep["labels"] = {{"learned", counts[0]},
                   {"failed", counts[1]},
                   {"undecided", counts[2]},
                   {"saturated", saturated},
                   {"learned_cut", opts.learned_cut},
                   {"window", window},
                   {"learned_fraction", ens.empty() ? 0.0 : static_cast<double>(counts[0]) / ens.size()}};

  json mart = json::array();
  for (const MartingaleRow& r : martingale_check(ens, opts)) {
    mart.push_back({{"t", r.t}, {"n", r.n}, {"mean", r.mean}, {"std_error", r.std_error}, {"within_4se", r.within_4se}});
  }
  rep["martingale"] = mart;

  PolicyRange emp;
  std::string range_note;
  try {
    emp = empirical_policy_range(sc.ps, sc.sm, cfg.thresholds.range_span);
  } catch (const std::exception& e) {
    range_note = e.what();
  }
  PolicyRange all = emp;
  all.merge(visited);
  rep["policy_range"] = {{"empirical", segments_json(emp)},
                         {"visited", segments_json(visited)},
                         {"lambda_span", cfg.thresholds.range_span}};
  if (!range_note.empty()) rep["policy_range"]["note"] = range_note;

  const double d = all.empty() ? 0.0 : increment_bound(sc.sm, sc.p, all);
  const double S = all.empty() ? 0.0 : variance_bound(sc.sm, sc.p, sc.eps, all, sc.true_state);
  const double delta = opts.delta > 0.0 ? opts.delta : -max_drift;

  const AzumaReport az = azuma_check(ens, opts, delta, d);
  json azj = {{"applicable", az.applicable}, {"reason", az.reason}, {"delta", num(az.delta)}, {"d", az.d},
              {"delta_source", opts.delta > 0.0 ? "config" : "largest recorded drift"}};
  json rows = json::array();
  for (const AzumaRow& r : az.rows) {
    rows.push_back({{"t", r.t}, {"n", r.n}, {"exceed", r.exceed}, {"frequency", r.frequency}, {"bound", r.bound},
                    {"std_error", r.std_error}, {"violated", r.violated}});
  }
  azj["rows"] = rows;
  rep["azuma"] = azj;

  const CltReport clt = clt_probe(ens, opts, S);
  json cj = {{"S", clt.S}, {"ks_target", 0.08}, {"ks_target_note", "pragmatic sanity bound at ensemble size 400"}};
  json crow = json::array();
  for (const CltRow& r : clt.rows) {
    crow.push_back({{"nu", r.nu}, {"used", r.used}, {"excluded", r.excluded}, {"ks_distance", r.ks_distance},
                    {"degenerate", r.degenerate}, {"min_tau", r.min_tau}, {"tau_floor", r.tau_floor},
                    {"tau_floor_ok", r.tau_floor_ok}});
  }
  cj["rows"] = crow;
  rep["clt"] = cj;

  const DriftFit fit = linear_drift_fit(ens);
  rep["drift_fit"] = {{"slope", fit.slope}, {"mean_drift", fit.mean_drift}, {"relative_gap", fit.relative_gap}};

  json thr;
  if (!emp.empty()) {
    const double base_max = max_base_drift_magnitude(sc.sm, sc.p, emp, sc.true_state);
    const double ed = cfg.thresholds.epsilon_delta > 0.0 ? cfg.thresholds.epsilon_delta : base_max / 2.0;
    const EpsilonThreshold et = epsilon_threshold(sc.sm, sc.p, emp, ed, sc.true_state);
    thr["epsilon"] = {{"delta", ed},
                      {"max_base_drift", base_max},
                      {"eps_bar", et.eps_bar},
                      {"ok", et.ok},
                      {"diagnostic", et.diagnostic},
                      {"eps_below_eps_bar", sc.eps < et.eps_bar}};
  }
  try {
    const EscapeThreshold es =
        escape_threshold(sc.ps, sc.sm, sc.p, sc.eps, cfg.thresholds.escape_delta);
    thr["escape"] = {{"ok", es.ok},
                     {"delta", cfg.thresholds.escape_delta},
                     {"lambda_bar", es.lambda_bar},
                     {"l_bar", es.l_bar},
                     {"min_drift_below", num(es.min_drift_below)},
                     {"diagnostic", es.diagnostic},
                     {"note", "l_bar bounds the failure-branch correction by grid search"}};
  } catch (const std::exception& e) {
    thr["escape"] = {{"ok", false}, {"diagnostic", e.what()}};
  }
  rep["thresholds"] = thr;
  return rep;
}

// ---------------------------------------------------------------- run

RunResult run_scenario(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  Simulator sim(cfg.scenario);

  if (opts.write_files) {
    res.dir = make_run_dir(opts.out_base, cfg, utc_stamp(started, "%Y%m%dT%H%M%SZ"));
    if (cfg.output.write_trajectories) fs::create_directories(res.dir / "trajectories");
  }

  const std::size_t n = cfg.seed_count;
  res.seeds.resize(n);
  const bool want_csv = (opts.write_files && cfg.output.write_trajectories) || opts.on_trajectory_csv;
  std::mutex cb_mu;
  parallel_for(n, opts.workers, [&](std::size_t i) {
    SeedResult& out = res.seeds[i];
    out.stream = opts.seed_offset + i;
    try {
      SummaryBuilder sb(cfg.diagnostics, cfg.scenario.horizon, cfg.scenario.lambda0, out.stream);
      TrajectoryCsv csv(cfg.output.trajectory_stride);
      const RunEnd end = sim.run(out.stream, [&](const StepRecord& r) {
        sb.observe(r);
        if (want_csv) csv.add(r);
      });
      out.summary = sb.finish(end);
      if (want_csv) {
        csv.finish(end.periods, end.lambda_T);
        if (opts.write_files && cfg.output.write_trajectories) write_text(res.dir / seed_file(out.stream), csv.text());
        if (opts.on_trajectory_csv) {
          std::lock_guard lock(cb_mu);
          opts.on_trajectory_csv(out.stream, csv.text());
        }
      }
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  });

  std::size_t ok = 0, learned = 0;
  double sum_T = 0.0, sum_drift = 0.0, periods = 0.0;
  json per_seed = json::array();
  std::ostringstream agg;
  agg << "stream,lambda_T,periods,saturated,label,lambda_min,window_max,sum_drift,successes,max_abs_increment,"
         "max_reconstruction_error,error\n";
  for (const SeedResult& s : res.seeds) {
    json e = {{"stream", s.stream}, {"ok", s.ok}};
    if (s.ok) {
      const TrajectorySummary& t = s.summary;
      ++ok;
      if (t.label.label == Label::Learned) ++learned;
      sum_T += t.lambda_T;
      sum_drift += t.sum_drift;
      periods += static_cast<double>(t.periods);
      e["lambda_T"] = t.lambda_T;
      e["periods"] = t.periods;
      e["label"] = to_string(t.label.label);
      e["saturated"] = t.saturated;
      if (t.saturated) e["boundary_note"] = t.boundary_note;
      if (opts.write_files && cfg.output.write_trajectories) e["file"] = seed_file(s.stream);
      agg << s.stream << ',' << format_double(t.lambda_T) << ',' << t.periods << ',' << (t.saturated ? 1 : 0) << ','
          << to_string(t.label.label) << ',' << format_double(t.label.lambda_min) << ','
          << format_double(t.label.window_max) << ',' << format_double(t.sum_drift) << ',' << t.successes << ','
          << format_double(t.max_abs_increment) << ',' << format_double(t.max_reconstruction_error) << ",\n";
    } else {
      e["error"] = s.error;
      agg << s.stream << ",,,,,,,,,,,\"" << s.error << "\"\n";
    }
    per_seed.push_back(e);
  }
  res.learned_fraction = ok ? static_cast<double>(learned) / static_cast<double>(ok) : 0.0;

  const auto& acc = cfg.acceptance;
  res.acceptance_declared = acc.learned_fraction_min.has_value() || acc.learned_fraction_max.has_value();
  if (acc.learned_fraction_min && !(res.learned_fraction >= *acc.learned_fraction_min)) {
    res.acceptance_passed = false;
    res.acceptance_messages.push_back("learned fraction " + format_double(res.learned_fraction) + " below minimum " +
                                      format_double(*acc.learned_fraction_min));
  }
  if (acc.learned_fraction_max && !(res.learned_fraction <= *acc.learned_fraction_max)) {
    res.acceptance_passed = false;
    res.acceptance_messages.push_back("learned fraction " + format_double(res.learned_fraction) + " above maximum " +
                                      format_double(*acc.learned_fraction_max));
  }
  if (res.acceptance_declared && ok < n) {
    res.acceptance_passed = false;
    res.acceptance_messages.push_back(std::to_string(n - ok) + " seeds failed");
  }

  res.diagnostics = diagnostics_report(cfg, res.seeds);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json& m = res.manifest;
  m["kind"] = "run";
  m["artifact"] = "phacklab";
  m["version"] = kVersion;
  m["config"] = to_json(cfg);
  m["config_hash"] = config_hash(cfg);
  json streams = json::array();
  for (const SeedResult& s : res.seeds) streams.push_back(s.stream);
  m["seeds"] = {{"seed", cfg.scenario.seed}, {"seed_offset", opts.seed_offset}, {"streams", streams}};
  m["per_seed"] = per_seed;
  m["aggregate"] = {{"trajectories", ok},
                    {"failed_seeds", n - ok},
                    {"learned_fraction", res.learned_fraction},
                    {"mean_lambda_T", ok ? sum_T / static_cast<double>(ok) : 0.0},
                    {"mean_drift", periods > 0.0 ? sum_drift / periods : 0.0},
                    {"steps", static_cast<std::int64_t>(periods)}};
  m["acceptance"] = {{"declared", res.acceptance_declared},
                     {"passed", res.acceptance_passed},
                     {"messages", res.acceptance_messages}};
  m["files"] = {{"aggregate", "aggregate.csv"},
                {"diagnostics", "diagnostics.json"},
                {"trajectories", opts.write_files && cfg.output.write_trajectories}};
  m["timing"] = {{"started_utc", utc_stamp(started, "%Y-%m-%dT%H:%M:%SZ")},
                 {"wall_clock_s", wall},
                 {"workers", opts.workers},
                 {"policy_nodes", sim.policy_nodes()}};

  if (opts.write_files) {
    write_text(res.dir / "aggregate.csv", agg.str());
    write_text(res.dir / "diagnostics.json", res.diagnostics.dump(2) + "\n");
    write_text(res.dir / "manifest.json", m.dump(2) + "\n");
  }
  return res;
}

// ---------------------------------------------------------------- sweep

std::vector<BeliefState> sweep_beliefs(const SweepOptions& sw) {
  std::vector<BeliefState> out;
  const auto n = static_cast<long>(std::floor((sw.lambda_max - sw.lambda_min) / sw.lambda_step + 1e-9));
  for (long k = 0; k <= n; ++k) {
    out.push_back(BeliefState::from_log_ratio(sw.lambda_min + static_cast<double>(k) * sw.lambda_step));
  }
  for (int k : sw.boundary_k) {
    const double tail = std::pow(10.0, -k);
    out.push_back(BeliefState::from_weight(1.0 - tail));
    out.push_back(BeliefState::from_weight(tail));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const BeliefState& a, const BeliefState& b) { return a.lambda() < b.lambda(); });
  return out;
}

SweepResult run_policy_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (!cfg.sweep) throw ConfigError("invalid config:\n  sweep: section required for the sweep command");
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const SweepOptions& sw = *cfg.sweep;
  const std::vector<BeliefState> beliefs = sweep_beliefs(sw);

  SweepResult res;
  if (opts.write_files) res.dir = make_run_dir(opts.out_base, cfg, utc_stamp(started, "%Y%m%dT%H%M%SZ"));

  json summary = json::object();
  json files = json::object();
  for (const SweepPayoff& sp : sw.payoffs) {
    PolicyTable table;
    table.rows.resize(beliefs.size());
    parallel_for(beliefs.size(), opts.workers, [&](std::size_t i) {
      try {
        table.rows[i].point = optimal_project(sp.ps, cfg.scenario.sm, beliefs[i]);
      } catch (const std::exception& e) {
        table.rows[i].ok = false;
        table.rows[i].error = e.what();
      }
    });
    bool any = false;
    for (const PolicyRow& r : table.rows) {
      if (!r.ok) {
        ++table.failures;
        continue;
      }
      table.l_star_min = any ? std::min(table.l_star_min, r.point.l_star) : r.point.l_star;
      table.l_star_max = any ? std::max(table.l_star_max, r.point.l_star) : r.point.l_star;
      any = true;
    }

    json s = {{"kind", to_string(sp.ps.kind)}, {"l_star_min", table.l_star_min}, {"l_star_max", table.l_star_max},
              {"failures", table.failures}};
    // l* at u = 1 - 10^-k in increasing k: diverging policies grow without bound.
    json towards_one = json::array();
    bool increasing = true;
    double prev = 0.0;
    std::vector<int> ks = sw.boundary_k;
    std::sort(ks.begin(), ks.end());
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double l = optimal_project(sp.ps, cfg.scenario.sm, BeliefState::from_weight(1.0 - std::pow(10.0, -ks[i])))
                           .l_star;
      towards_one.push_back({{"k", ks[i]}, {"l_star", l}});
      if (i > 0 && !(l > prev)) increasing = false;
      prev = l;
    }
    s["towards_u1"] = towards_one;
    s["strictly_increasing_towards_u1"] = ks.size() >= 2 && increasing;
    if (ks.size() >= 2) {
      const double first = towards_one.front()["l_star"].get<double>();
      s["growth_towards_u1"] = prev / first;
      s["constricted"] = !(increasing && prev / first > 10.0);
    }
    summary[sp.label] = s;
    const std::string file = "policy_" + sp.label + ".csv";
    files[sp.label] = file;
    if (opts.write_files) {
      std::ofstream out(res.dir / file, std::ios::binary);
      write_policy_csv(out, table);
    }
    res.tables.push_back(std::move(table));
  }

  json growth = json::array();
  for (std::size_t a = 0; a < sw.payoffs.size(); ++a) {
    for (std::size_t b = a + 1; b < sw.payoffs.size(); ++b) {
      const GrowthComparison g = growth_compare(sw.payoffs[a].ps, sw.payoffs[b].ps);
      growth.push_back({{"first", sw.payoffs[a].label},
                        {"second", sw.payoffs[b].label},
                        {"order", to_string(g.order)},
                        {"ratios", {num(g.ratios[0]), num(g.ratios[1]), num(g.ratios[2])}},
                        {"limit_estimate", num(g.limit_estimate)},
                        {"note", g.note}});
    }
  }

  json& m = res.manifest;
  m["kind"] = "sweep";
  m["artifact"] = "phacklab";
  m["version"] = kVersion;
  m["config"] = to_json(cfg);
  m["config_hash"] = config_hash(cfg);
  m["points"] = beliefs.size();
  m["summary"] = summary;
  m["growth_compare"] = growth;
  m["files"] = {{"policy", files}, {"summary", "sweep_summary.json"}};
  m["timing"] = {{"started_utc", utc_stamp(started, "%Y-%m-%dT%H:%M:%SZ")},
                 {"wall_clock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                 {"workers", opts.workers}};
  if (opts.write_files) {
    write_text(res.dir / "sweep_summary.json", json({{"summary", summary}, {"growth_compare", growth}}).dump(2) + "\n");
    write_text(res.dir / "manifest.json", m.dump(2) + "\n");
  }
  return res;
}

// ---------------------------------------------------------------- plot data

std::optional<PlotKind> parse_plot_kind(const std::string& s) {
  if (s == "lambda_paths") return PlotKind::LambdaPaths;
  if (s == "drift_profile") return PlotKind::DriftProfile;
  if (s == "policy_curve") return PlotKind::PolicyCurve;
  if (s == "azuma_table") return PlotKind::AzumaTable;
  return std::nullopt;
}

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::LambdaPaths: return "lambda_paths";
    case PlotKind::DriftProfile: return "drift_profile";
    case PlotKind::PolicyCurve: return "policy_curve";
    case PlotKind::AzumaTable: return "azuma_table";
  }
  return "";
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

fs::path emit_plotdata(const fs::path& manifest_path, PlotKind kind) {
  const json m = read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  const ExperimentConfig cfg = parse_config(m.at("config"));
  const fs::path out_path = dir / ("plot_" + to_string(kind) + ".csv");
  std::ostringstream os;

  switch (kind) {
    case PlotKind::LambdaPaths: {
      os << "# lambda paths per seed; columns: seed,t,lambda\nseed,t,lambda\n";
      if (m.value("kind", "run") != "run") throw std::runtime_error("lambda_paths needs a run manifest");
      for (const json& e : m.at("per_seed")) {
        if (!e.contains("file")) {
          throw std::runtime_error("manifest has no trajectory files (output.write_trajectories was false)");
        }
        std::ifstream in(dir / e.at("file").get<std::string>());
        if (!in) throw std::runtime_error("missing trajectory file " + e.at("file").get<std::string>());
        std::string line;
        std::getline(in, line);  // header
        const auto stream = e.at("stream").get<std::uint64_t>();
        while (std::getline(in, line)) {
          const auto cols = split_csv_line(line);
          if (cols.size() >= 2) os << stream << ',' << cols[0] << ',' << cols[1] << '\n';
        }
      }
      break;
    }
    case PlotKind::DriftProfile: {
      const ScenarioConfig& sc = cfg.scenario;
      os << "# drift at project l for p = " << format_double(sc.p) << ", eps = " << format_double(sc.eps)
         << "; columns: l,base,distortion,total\nl,base,distortion,total\n";
      const int n = 601;
      for (int k = 0; k < n; ++k) {
        const double l = std::pow(10.0, -3.0 + 6.0 * k / (n - 1));
        const DriftTerms dt = drift(sc.sm, sc.p, sc.eps, l, sc.true_state);
        os << format_double(l) << ',' << format_double(dt.base) << ',' << format_double(dt.distortion) << ','
           << format_double(dt.total) << '\n';
      }
      break;
    }
    case PlotKind::PolicyCurve: {
      os << "# optimal project per belief; columns: payoff,u,lambda,l_star\npayoff,u,lambda,l_star\n";
      if (m.value("kind", "run") == "sweep") {
        for (const auto& [label, file] : m.at("files").at("policy").items()) {
          std::ifstream in(dir / file.get<std::string>());
          if (!in) throw std::runtime_error("missing policy file " + file.get<std::string>());
          std::string line;
          std::getline(in, line);
          while (std::getline(in, line)) {
            const auto cols = split_csv_line(line);
            if (cols.size() >= 3) os << label << ',' << cols[0] << ',' << cols[1] << ',' << cols[2] << '\n';
          }
        }
      } else {
        const PolicyTable t = policy_table_lambda(cfg.scenario.ps, cfg.scenario.sm, [&] {
          std::vector<double> g;
          for (int k = -80; k <= 80; ++k) g.push_back(0.25 * k);
          return g;
        }());
        for (const PolicyRow& r : t.rows) {
          if (!r.ok) continue;
          os << to_string(cfg.scenario.ps.kind) << ',' << format_double(r.point.u) << ','
             << format_double(r.point.lambda) << ',' << format_double(r.point.l_star) << '\n';
        }
      }
      break;
    }
    case PlotKind::AzumaTable: {
      const json d = read_json(dir / "diagnostics.json");
      const json& az = d.at("azuma");
      os << "# Azuma exceedance frequency vs bound (applicable = " << (az.at("applicable").get<bool>() ? "true" : "false")
         << "); columns: t,n,exceed,frequency,bound,std_error,violated\nt,n,exceed,frequency,bound,std_error,violated\n";
      for (const json& r : az.at("rows")) {
        os << r.at("t").get<std::int64_t>() << ',' << r.at("n").get<std::uint64_t>() << ','
           << r.at("exceed").get<std::uint64_t>() << ',' << format_double(r.at("frequency").get<double>()) << ','
           << format_double(r.at("bound").get<double>()) << ',' << format_double(r.at("std_error").get<double>())
           << ',' << (r.at("violated").get<bool>() ? "true" : "false") << '\n';
      }
      break;
    }
  }
  write_text(out_path, os.str());
  return out_path;
}

json diagnose(const fs::path& manifest_path, unsigned workers) {
  const json m = read_json(manifest_path);
  if (m.value("kind", "run") != "run") throw std::runtime_error("diagnose needs a run manifest");
  const ExperimentConfig cfg = parse_config(m.at("config"));
  RunOptions opts;
  opts.workers = workers;
  opts.write_files = false;
  opts.seed_offset = m.at("seeds").at("seed_offset").get<std::uint64_t>();
  const RunResult res = run_scenario(cfg, opts);
  json rep = res.diagnostics;
  rep["source_manifest"] = manifest_path.filename().string();
  // The echoed per-seed terminal states must be reproduced exactly.
  std::size_t mismatches = 0;
  const json& per_seed = m.at("per_seed");
  for (std::size_t i = 0; i < per_seed.size() && i < res.seeds.size(); ++i) {
    const json& e = per_seed[i];
    if (!e.value("ok", false) || !res.seeds[i].ok) continue;
    if (e.at("lambda_T").get<double>() != res.seeds[i].summary.lambda_T) ++mismatches;
  }
  rep["reproduction"] = {{"seeds", per_seed.size()}, {"terminal_mismatches", mismatches}};
  write_text(manifest_path.parent_path() / "diagnose.json", rep.dump(2) + "\n");
  return rep;
}

}  // namespace phacklab
