#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <thread>

#include "phacklab/errors.hpp"
#include "phacklab/experiments.hpp"

namespace fs = std::filesystem;
using namespace phacklab;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;
constexpr int kExitUsage = 64;

struct Common {
  unsigned workers = 1;
  std::string out = "out";
  std::uint64_t seed_offset = 0;
};

RunOptions run_options(const Common& c) {
  RunOptions o;
  o.workers = c.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : c.workers;
  o.out_base = c.out;
  o.seed_offset = c.seed_offset;
  return o;
}

int cmd_run(const std::string& path, const Common& c) {
  const ExperimentConfig cfg = load_config(path);
  const RunResult res = run_scenario(cfg, run_options(c));
  const auto& agg = res.manifest["aggregate"];
  std::cout << "run " << cfg.name << ": " << agg["trajectories"] << " trajectories, learned fraction "
            << format_double(res.learned_fraction) << "\n"
            << "manifest: " << (res.dir / "manifest.json").string() << "\n";
  if (agg["failed_seeds"].get<std::size_t>() > 0) {
    std::cerr << agg["failed_seeds"] << " seeds failed; see manifest per_seed errors\n";
  }
  if (res.acceptance_declared) {
    if (!res.acceptance_passed) {
      for (const auto& m : res.acceptance_messages) std::cerr << "acceptance: " << m << "\n";
      return kExitAcceptance;
    }
    std::cout << "acceptance: passed\n";
  }
  return 0;
}

int cmd_sweep(const std::string& path, const Common& c) {
  const ExperimentConfig cfg = load_config(path);
  const SweepResult res = run_policy_sweep(cfg, run_options(c));
  for (const auto& [label, s] : res.manifest["summary"].items()) {
    std::cout << label << ": l_star in [" << format_double(s["l_star_min"].get<double>()) << ", "
              << format_double(s["l_star_max"].get<double>()) << "]";
    if (s.contains("constricted")) std::cout << (s["constricted"].get<bool>() ? ", constricted" : ", diverging");
    std::cout << "\n";
  }
  for (const auto& g : res.manifest["growth_compare"]) {
    std::cout << g["first"].get<std::string>() << " vs " << g["second"].get<std::string>() << ": "
              << g["order"].get<std::string>() << "\n";
  }
  std::cout << "manifest: " << (res.dir / "manifest.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phacklab: belief dynamics under p-hacking"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  std::string config_path;
  std::string manifest_path;
  std::string kind;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--workers", common.workers, "Worker threads (0 = all cores)")->capture_default_str();
    sub->add_option("--out", common.out, "Output base directory")->capture_default_str();
    sub->add_option("--seed-offset", common.seed_offset, "First RNG stream index")->capture_default_str();
  };

  CLI::App* run = app.add_subcommand("run", "Simulate every seed of a scenario");
  run->add_option("config", config_path, "Scenario config (JSON)")->required();
  add_common(run);

  CLI::App* sweep = app.add_subcommand("sweep", "Policy tables per payoff over a belief grid");
  sweep->add_option("config", config_path, "Sweep config (JSON)")->required();
  add_common(sweep);

  CLI::App* plot = app.add_subcommand("plotdata", "Emit tidy CSV for plotting");
  plot->add_option("manifest", manifest_path, "manifest.json of a run or sweep")->required();
  plot->add_option("--kind", kind, "lambda_paths | drift_profile | policy_curve | azuma_table")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "Re-simulate a run and write diagnose.json");
  diag->add_option("manifest", manifest_path, "manifest.json of a run")->required();
  diag->add_option("--workers", common.workers, "Worker threads (0 = all cores)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, common);
    if (*sweep) return cmd_sweep(config_path, common);
    if (*plot) {
      const auto k = parse_plot_kind(kind);
      if (!k) {
        std::cerr << "unknown --kind '" << kind << "'; expected lambda_paths, drift_profile, policy_curve or azuma_table\n";
        return kExitUsage;
      }
      std::cout << emit_plotdata(manifest_path, *k).string() << "\n";
      return 0;
    }
    if (*diag) {
      const auto rep = diagnose(manifest_path, run_options(common).workers);
      std::cout << "diagnose: " << rep["trajectories"] << " trajectories, "
                << rep["reproduction"]["terminal_mismatches"] << " terminal mismatches\n"
                << (fs::path(manifest_path).parent_path() / "diagnose.json").string() << "\n";
      return rep["reproduction"]["terminal_mismatches"].get<std::size_t>() == 0 ? 0 : kExitFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
