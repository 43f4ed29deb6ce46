// soaptail: experiment runner.
//
//   soaptail <rank|analyze-light|analyze-heavy|simulate|classify> --config FILE [--out DIR]
//            [--seed N] [--jobs N] [--reps N] [--threads N]
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 unstable config.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "soaptail/errors.hpp"
#include "soaptail/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;
constexpr int kUnstable = 4;

int exit_code(const soaptail::Error& e) {
  using namespace soaptail;
  if (dynamic_cast<const UnstableConfig*>(&e)) return kUnstable;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidParameter*>(&e)) return kConfig;
  return kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"M/G/1 SOAP scheduling analysis and simulation"};
  app.set_version_flag("--version", std::string("soaptail ") + soaptail::kVersion);
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed, jobs;
  std::optional<unsigned> reps, threads;

  const std::vector<std::pair<const char*, const char*>> commands{
      {"rank", "rank functions and worst ages (rank.csv, worst_age.json)"},
      {"analyze-light", "decay rates and verdicts for light tails (light_report.json)"},
      {"analyze-heavy", "exponent fit and diagnostics for heavy tails (heavy_fit.json, diagnostics.csv)"},
      {"simulate", "event-driven simulation (sim_summary.csv, tail_<policy>.csv, compare.csv)"},
      {"classify", "tail class, NBUE class and Gittins verdict (classify.json)"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment file (INI)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--jobs", jobs, "simulated arrivals per replication, warmup included");
    sub->add_option("--reps", reps, "replications");
    sub->add_option("--threads", threads, "worker threads for replications (0: all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    const soaptail::Command cmd = soaptail::parse_command(app.get_subcommands().front()->get_name());
    soaptail::ExperimentSpec spec = soaptail::load_experiment(config);
    if (seed) spec.seed = *seed;
    if (jobs) {
      spec.jobs = *jobs;
      spec.warmup.reset();
    }
    if (reps) spec.reps = *reps;
    if (threads) spec.threads = *threads;
    for (const auto& path : soaptail::run_command(cmd, spec, out_dir)) std::cout << path.string() << "\n";
    return kOk;
  } catch (const soaptail::Error& e) {
    std::cerr << "soaptail: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "soaptail: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "soaptail: " << e.what() << "\n";
    return kNumeric;
  }
}
