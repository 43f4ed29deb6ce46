#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "soaptail/distribution.hpp"
#include "soaptail/rank_function.hpp"

namespace soaptail {

struct SufficientResult {
  bool holds;
  double lhs;     // zeta + (theta-1)^+ - (1-theta)^+ / eta
  double rhs;     // (alpha-1) / beta
  double margin;  // rhs - lhs; positive exactly when the condition holds
};

/// zeta + (theta-1)^+ - (1-theta)^+/eta < (alpha-1)/beta, with (.)/inf = 0.
SufficientResult sufficient_condition(double zeta, double theta, double eta, double alpha, double beta);

struct RegressionStats {
  std::size_t n = 0;
  double rss = 0.0;
  double r2 = 0.0;
};

// One maximal w_x-interval with b >= x.
struct FitInterval {
  double x;
  double b;
  double c;
  bool open;
};

struct FitRow {
  double x;
  double w_x;
  std::size_t n_intervals;  // with b >= x
  double max_gap_ratio;     // max (c - b)/x over those intervals, 0 if none
  std::optional<double> max_closed_c;
};

struct HeavyTailFit {
  // Raw least-squares estimates.
  double zeta = 0.0;
  double theta = 0.0;
  double eta = std::numeric_limits<double>::infinity();
  RegressionStats zeta_theta_fit;
  RegressionStats eta_fit;
  bool vacuous = false;       // no x had an interval with b >= x
  bool collinear = false;     // log b and log x collinear: zeta pinned to 0
  // Exponents clamped into the domain of the condition.
  double zeta_eval = 0.0;
  double theta_eval = 0.0;
  double eta_eval = 1.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<SufficientResult> sufficient;
  std::vector<FitRow> rows;
  std::vector<FitInterval> intervals;
};

/// Fits c - b = O(b^zeta x^theta) and c = O(x^eta) over maximal w_x-intervals
/// with b >= x, for x on the grid. alpha/beta come from d's tail class when
/// it is nicely heavy.
HeavyTailFit fit_exponents(const RankFunction& r, const JobSizeDistribution& d, const std::vector<double>& x_grid,
                           double horizon);

/// F-bar((1 - rho) t).
double tail_target(const JobSizeDistribution& d, const SystemParams& p, double t);

struct DiagnosticRow {
  double x;
  double p;
  std::size_t n_intervals;
  double segment_sum;     // sum_k E[X_k[w_x]^{p+1}]
  double sum_ratio;       // segment_sum / x^p
  double integral;        // int_0^x da / (1 - lambda E[X_0[w_x(a)-]])
  double integral_ratio;  // integral (1 - rho) / x
};

std::vector<DiagnosticRow> diagnostic_curves(const RankFunction& r, const JobSizeDistribution& d,
                                             const SystemParams& p, const std::vector<double>& x_grid,
                                             const std::vector<double>& p_list, double horizon);

}  // namespace soaptail
