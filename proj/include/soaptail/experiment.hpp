#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "soaptail/distribution.hpp"
#include "soaptail/rank_function.hpp"

namespace soaptail {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { Rank, AnalyzeLight, AnalyzeHeavy, Simulate, Classify };

std::string to_string(Command c);
Command parse_command(const std::string& name);

enum class PolicyType { Gittins, ApproxGittins, Fcfs, Fb, Step, Spike, File };

// One entry of the [policies] list, e.g. "step(2)" or "approx-gittins(0.1)".
struct PolicySpec {
  PolicyType type;
  double param = 0.0;
  std::string path;  // File only, relative to the config's directory

  std::string text() const;
};

PolicySpec parse_policy(const std::string& text);

// Grid values are written as a list ("1, 2, 4"), linspace(a, b, n) or
// geomspace(a, b, n). "auto" picks a default from the distribution.
std::vector<double> parse_grid(const std::string& expr);

struct ExperimentSpec {
  std::string name = "experiment";
  DistributionSpec distribution;
  std::optional<double> lambda;
  std::optional<double> rho;
  std::vector<PolicySpec> policies;

  std::string ages = "auto";
  std::string sizes = "geomspace(2, 256, 8)";
  std::string moments = "1";
  double horizon = 1e5;  // w-interval search limit for the heavy-tail fit
  std::size_t knots = 2048;

  std::uint64_t jobs = 1'000'000;
  std::optional<std::uint64_t> warmup;  // default: 10% of jobs
  std::uint64_t seed = 1;
  unsigned reps = 1;
  unsigned threads = 0;
  bool busy_periods = false;

  std::filesystem::path base_dir;  // where File policies are resolved
};

/// Parses INI text. Throws ConfigError naming the line or section.key.
ExperimentSpec parse_experiment(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment(const std::filesystem::path& path);

/// Canonical INI form with every default filled in.
std::string resolved_spec(const ExperimentSpec& spec);

JobSizeDistribution experiment_distribution(const ExperimentSpec& spec);
SystemParams experiment_system(const ExperimentSpec& spec, const JobSizeDistribution& d);
RankFunction build_policy(const PolicySpec& p, const JobSizeDistribution& d, const ExperimentSpec& spec);

/// Runs one subcommand and returns the files written, in write order.
std::vector<std::filesystem::path> run_command(Command c, const ExperimentSpec& spec,
                                               const std::filesystem::path& out_dir);

}  // namespace soaptail
