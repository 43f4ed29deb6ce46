#pragma once

#include <limits>
#include <vector>

#include "soaptail/distribution.hpp"
#include "soaptail/rank_function.hpp"

namespace soaptail {

/// phi(b, c) = int_b^c tail / (tail(b) - tail(c)); +inf without completion mass.
double phi(const JobSizeDistribution& d, double b, double c);

// Precomputed knots and right-cumulative tail integrals R(t) = int_t^xmax tail
// for fast repeated Gittins-rank evaluation on one distribution. Storing R from
// the right keeps relative precision deep in the tail.
class GittinsSolver {
 public:
  explicit GittinsSolver(JobSizeDistribution d, const AgeGridSpec& grid = {});

  /// inf over c in (a, x_max] of phi(a, c), including c -> a+ and c = infinity.
  double rank(double a, double tol = 1e-10) const;
  /// R(t) at any age.
  double tail_integral_from(double t) const;

  const JobSizeDistribution& distribution() const { return d_; }
  const std::vector<double>& knots() const { return knots_; }

 private:
  JobSizeDistribution d_;
  std::vector<double> knots_;
  std::vector<double> tail_;
  std::vector<double> right_;  // R at each knot
};

double gittins_rank(const JobSizeDistribution& d, double a, double tol = 1e-10);

struct GittinsBuildOptions {
  AgeGridSpec grid{};
  double refine_tol = 1e-6;  // relative midpoint error triggering a split
  int max_depth = 8;
};

RankFunction build_gittins(const JobSizeDistribution& d, const GittinsBuildOptions& opts = {});

/// int_b^c (p+1)(t-b)^p tail(t) dt = E[max{0, min{X,c} - b}^{p+1}].
double segment_moment(const JobSizeDistribution& d, double b, double c, double p);

/// Expected cost of serving from age b up to c, paying w if not done by then
/// (conditional on X > b).
double game_cost(const JobSizeDistribution& d, double w, double b, double c);
/// inf over c >= b of game_cost, c = b and c = infinity included.
double game_opt(const JobSizeDistribution& d, double w, double b);
/// max{w >= 0 : game_opt(w; a) = w}, by bisection on w.
double rank_via_game(const JobSizeDistribution& d, double a);

/// Gittins plus a point override (1+eps) r(a_eps) at the smallest grid age
/// whose rank is within factor 1+eps of the global sup.
RankFunction approx_gittins(const JobSizeDistribution& d, double eps, const GittinsBuildOptions& opts = {});

}  // namespace soaptail
