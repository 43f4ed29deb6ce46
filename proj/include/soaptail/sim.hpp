#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "soaptail/distribution.hpp"
#include "soaptail/rank_function.hpp"

namespace soaptail {

struct SimConfig {
  JobSizeDistribution dist;
  double lambda;
  RankFunction policy;
  std::uint64_t n_jobs = 1'000'000;  // arrivals per replication, warmup included
  std::uint64_t warmup = 100'000;    // leading arrivals whose response is discarded
  std::uint64_t seed = 1;
  unsigned replications = 1;
  unsigned threads = 0;              // 0: one per hardware thread
  std::size_t max_queue = 10'000'000;
  bool record_busy_periods = false;
};

/// SimConfig with the default 10% warmup.
SimConfig make_sim_config(JobSizeDistribution d, double lambda, RankFunction policy, std::uint64_t n_jobs,
                          unsigned replications, std::uint64_t seed);

struct TailPoint {
  double t;
  double survival;
  double ci_lo;
  double ci_hi;
};

struct ReplicationResult {
  std::vector<double> sorted;  // recorded response times, ascending
  double mean = 0.0;
  double busy_time = 0.0;
  double work = 0.0;
  double work_error = 0.0;     // |busy - work| / work
  std::vector<double> busy_periods;  // ascending, when recorded
};

inline constexpr std::array<double, 5> kReportedQuantiles{0.5, 0.9, 0.99, 0.999, 0.9999};

struct SimResult {
  std::string policy;
  std::vector<ReplicationResult> reps;
  std::size_t total = 0;
  double mean = 0.0;
  double ci_half = 0.0;  // 95% Student-t half-width over replication means
  double stderr_mean = 0.0;
  std::array<double, 5> quantiles{};
  std::vector<TailPoint> tail;  // 512 log-spaced points from q0.5 to the max

  /// Pooled empirical P{T > t}.
  double survival(double t) const;
  /// Pooled empirical quantile (smallest sample with CDF >= q).
  double quantile(double q) const;
  std::vector<double> per_rep_means() const;
  double max_work_error() const;
};

SimResult simulate(const SimConfig& cfg);

struct DecayFit {
  double rate;
  double stderr_rate;  // from the spread of per-replication slopes; nan with one replication
  double t_lo;
  double t_hi;
  std::vector<double> per_rep;
};

/// Least-squares slope of -log P{T > t} over [q0.90, q0.9999].
DecayFit fit_decay(const SimResult& r);

/// Same fit over the pooled busy-period samples.
DecayFit fit_busy_period_decay(const SimResult& r);

struct RatioPoint {
  double t;
  double ratio;
  double ci_lo;
  double ci_hi;
};

/// P{T > t} / F-bar((1 - rho) t) over the tail grid, starting with t = 0.
std::vector<RatioPoint> tail_ratio(const SimResult& r, const JobSizeDistribution& d, const SystemParams& p);

}  // namespace soaptail
