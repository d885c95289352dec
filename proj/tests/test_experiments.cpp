#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "phacklab/errors.hpp"
#include "phacklab/experiments.hpp"

using namespace phacklab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phacklab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json small_config() {
  return json::parse(R"({
    "name": "small",
    "payoff": {"kind": "bounded_exp", "c": 1, "gamma": 4.6},
    "dynamics": {"p": 0.5, "eps": 0.01, "horizon": 500},
    "seeds": {"seed": 3, "count": 6},
    "diagnostics": {"martingale_t": [100], "azuma_t": [200], "nu": [5]},
    "acceptance": {"learned_fraction_max": 1.0}
  })");
}

}  // namespace

TEST_CASE("config parses with defaults and round-trips") {
  const auto cfg = parse_config(small_config());
  CHECK(cfg.name == "small");
  CHECK(cfg.scenario.horizon == 500);
  CHECK(cfg.scenario.sm == SuccessModel{});
  CHECK(cfg.seed_count == 6);
  CHECK(cfg.acceptance.learned_fraction_max == 1.0);
  CHECK_FALSE(cfg.acceptance.learned_fraction_min.has_value());
  CHECK(parse_config(to_json(cfg)) == cfg);
  CHECK(config_hash(cfg) == config_hash(parse_config(to_json(cfg))));
  CHECK(config_hash(cfg).size() == 8);

  json fast = small_config();
  fast["payoff"] = {{"kind", "fast_reciprocal"}, {"c", 1}, {"d", 2.5}};
  fast["sweep"] = {{"payoffs", json::array({{{"label", "f"}, {"kind", "fast_reciprocal"}, {"d", 3}}})},
                   {"boundary_k", {2, 3}}};
  const auto f = parse_config(fast);
  CHECK(f.scenario.ps.kind == PayoffKind::FastReciprocal);
  CHECK(parse_config(to_json(f)) == f);
  CHECK(config_hash(f) != config_hash(cfg));
}

TEST_CASE("config errors name every bad field") {
  json j = small_config();
  j["dynamics"]["p"] = 1.5;
  j["dynamics"]["horizn"] = 3;
  j["payoff"]["gamma"] = "big";
  j["seeds"]["count"] = 0;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("dynamics.p") != std::string::npos);
    CHECK(msg.find("dynamics.horizn: unknown key") != std::string::npos);
    CHECK(msg.find("payoff.gamma") != std::string::npos);
    CHECK(msg.find("seeds.count") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("number formatting keeps 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(std::stod(format_double(-2.5e-300)) == -2.5e-300);
  CHECK(format_double(NAN) == "nan");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("runs are deterministic across worker counts") {
  const auto cfg = parse_config(small_config());
  std::map<std::uint64_t, std::string> one, four;
  RunOptions o;
  o.write_files = false;
  o.on_trajectory_csv = [&](std::uint64_t s, const std::string& csv) { one[s] = csv; };
  const auto r1 = run_scenario(cfg, o);
  o.workers = 4;
  o.on_trajectory_csv = [&](std::uint64_t s, const std::string& csv) { four[s] = csv; };
  const auto r4 = run_scenario(cfg, o);
  CHECK(one.size() == 6);
  CHECK(one == four);
  CHECK(r1.learned_fraction == r4.learned_fraction);
  CHECK(r1.acceptance_declared);
  CHECK(r1.acceptance_passed);
}

TEST_CASE("run writes the documented layout") {
  const fs::path base = scratch("run");
  auto cfg = parse_config(small_config());
  cfg.output.trajectory_stride = 10;
  RunOptions o;
  o.out_base = base;
  o.seed_offset = 100;
  const auto res = run_scenario(cfg, o);
  CHECK(fs::exists(res.dir / "manifest.json"));
  CHECK(fs::exists(res.dir / "aggregate.csv"));
  CHECK(fs::exists(res.dir / "diagnostics.json"));
  CHECK(fs::exists(res.dir / "trajectories" / "seed_00100.csv"));
  CHECK(res.dir.filename().string().rfind("small-" + config_hash(cfg) + "-", 0) == 0);

  const json m = json::parse(slurp(res.dir / "manifest.json"));
  CHECK(parse_config(m["config"]) == cfg);
  CHECK(m["seeds"]["streams"][0] == 100);
  CHECK(m["per_seed"].size() == 6);
  CHECK(m["version"] == kVersion);

  const std::string csv = slurp(res.dir / "trajectories" / "seed_00100.csv");
  CHECK(csv.rfind("t,lambda,u,l_star,outcome,drift_base,drift_distortion,sigma_sq\n", 0) == 0);
  CHECK(csv.find("\n10,") != std::string::npos);
  CHECK(csv.find("\n11,") == std::string::npos);
  CHECK(csv.find("\n500,") != std::string::npos);

  for (const char* kind : {"lambda_paths", "drift_profile", "policy_curve", "azuma_table"}) {
    const auto out = emit_plotdata(res.dir / "manifest.json", *parse_plot_kind(kind));
    const std::string text = slurp(out);
    CHECK(text.rfind("# ", 0) == 0);
  }
  const std::string paths = slurp(res.dir / "plot_lambda_paths.csv");
  CHECK(paths.find("\nseed,t,lambda\n") != std::string::npos);
  CHECK(slurp(res.dir / "plot_drift_profile.csv").find("\nl,base,distortion,total\n") != std::string::npos);
  CHECK_FALSE(parse_plot_kind("histogram").has_value());

  const json rep = diagnose(res.dir / "manifest.json", 2);
  CHECK(rep["reproduction"]["terminal_mismatches"] == 0);
  CHECK(fs::exists(res.dir / "diagnose.json"));
  fs::remove_all(base);
}

TEST_CASE("zero horizon keeps only initial states") {
  json j = small_config();
  j["dynamics"]["horizon"] = 0;
  const auto cfg = parse_config(j);
  std::map<std::uint64_t, std::string> csvs;
  RunOptions o;
  o.write_files = false;
  o.on_trajectory_csv = [&](std::uint64_t s, const std::string& csv) { csvs[s] = csv; };
  const auto res = run_scenario(cfg, o);
  CHECK(res.manifest["aggregate"]["steps"] == 0);
  for (const auto& s : res.seeds) {
    CHECK(s.ok);
    CHECK(s.summary.periods == 0);
    CHECK(s.summary.lambda_T == 0.0);
  }
  CHECK(csvs[0] == "t,lambda,u,l_star,outcome,drift_base,drift_distortion,sigma_sq\n0,0,0.5,,terminal,,,\n");
}

TEST_CASE("acceptance thresholds are enforced") {
  json j = small_config();
  j["acceptance"] = {{"learned_fraction_min", 0.9}};
  RunOptions o;
  o.write_files = false;
  const auto res = run_scenario(parse_config(j), o);
  CHECK(res.learned_fraction < 0.9);  // 500 periods are far too few to reach the cut
  CHECK_FALSE(res.acceptance_passed);
  CHECK_FALSE(res.acceptance_messages.empty());
}

TEST_CASE("policy sweep") {
  const fs::path base = scratch("sweep");
  const json j = json::parse(R"({
    "name": "sweep",
    "sweep": {
      "payoffs": [
        {"label": "bounded", "kind": "bounded_exp", "c": 1, "gamma": 4.6},
        {"label": "d2", "kind": "fast_reciprocal", "c": 1, "d": 2},
        {"label": "d3", "kind": "fast_reciprocal", "c": 1, "d": 3}
      ],
      "lambda_min": -10, "lambda_max": 10, "lambda_step": 1,
      "boundary_k": [2, 3, 4, 5, 6, 7, 8]
    }
  })");
  const auto cfg = parse_config(j);
  RunOptions o;
  o.out_base = base;
  const auto res = run_policy_sweep(cfg, o);
  const json& s = res.manifest["summary"];
  CHECK(s["bounded"]["constricted"] == true);
  CHECK(s["bounded"]["l_star_max"].get<double>() < 2.0);
  CHECK(s["d2"]["strictly_increasing_towards_u1"] == true);
  CHECK(s["d3"]["strictly_increasing_towards_u1"] == true);
  bool found = false;
  for (const auto& g : res.manifest["growth_compare"]) {
    if (g["first"] == "d2" && g["second"] == "d3") {
      CHECK(g["order"] == "slower");
      found = true;
    }
  }
  CHECK(found);
  CHECK(fs::exists(res.dir / "policy_d2.csv"));
  CHECK(slurp(res.dir / "policy_d2.csv").rfind("u,lambda,l_star,ep_star,foc_residual\n", 0) == 0);
  const auto curve = emit_plotdata(res.dir / "manifest.json", PlotKind::PolicyCurve);
  CHECK(slurp(curve).find("\nd3,") != std::string::npos);
  CHECK(res.tables.size() == 3);
  fs::remove_all(base);
}
