#pragma once

#include <limits>
#include <string>
#include <vector>

namespace soaptail {

// Linear segment of a rank function on [start, end); end may be +infinity.
struct Piece {
  double start;
  double end;
  double v0;     // rank at start
  double slope;  // rank change per unit age

  double at(double a) const { return v0 + slope * (a - start); }
  // Left limit at end (+-infinity for unbounded sloped pieces).
  double end_value() const;
};

// Point override: the rank at exactly this age.
struct Spike {
  double age;
  double rank;
};

// Supremum of the rank beyond the last finite piece boundary, for ranks that
// keep moving past the computed horizon (e.g. a Gittins rank creeping up to
// 1/mu_min). attained = false means the sup is only approached.
struct TailSup {
  double value = -std::numeric_limits<double>::infinity();
  bool attained = true;
};

class RankFunction {
 public:
  RankFunction(std::string label, std::vector<Piece> pieces, std::vector<Spike> spikes,
               double x_max, TailSup tail_sup = {});

  /// Rank at age a; spikes override the linear pieces at their exact age.
  double operator()(double a) const;
  /// Rank ignoring spikes.
  double linear(double a) const;
  std::size_t piece_index(double a) const;

  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<Spike>& spikes() const { return spikes_; }
  const std::string& label() const { return label_; }
  double x_max() const { return x_max_; }
  const TailSup& tail_sup() const { return tail_sup_; }

  /// sup of r over [lo, hi), exact from piece end values and spikes.
  double sup_over(double lo, double hi) const;
  /// Global sup, tail_sup included.
  double sup() const;

  RankFunction with_spike(Spike s, std::string label) const;

 private:
  std::string label_;
  std::vector<Piece> pieces_;
  std::vector<Spike> spikes_;
  double x_max_;
  TailSup tail_sup_;
};

enum class PolicyKind { Fcfs, Fb, Step, Spike };

/// FCFS (rank 0), FB (rank = age), step(a*) = min{a, a*}, spike(a*) = 1{a = a*}.
RankFunction make_policy(PolicyKind kind, double a_star = 0.0,
                         double x_max = std::numeric_limits<double>::infinity());

/// Smallest age attaining the global maximum; x_max when the maximum is only
/// approached. Uses relative tolerance 1e-8 between candidate maxima.
double worst_age(const RankFunction& r);

struct WInterval {
  double b;
  double c;
  bool open = false;  // still running at the scan horizon; c is the horizon
};

struct WIntervalSet {
  double w;
  // intervals[0] is (0, c0) and may be empty (c0 = 0); later intervals are
  // non-degenerate and ordered.
  std::vector<WInterval> intervals;
  bool open_ended = false;
};

WIntervalSet w_intervals(const RankFunction& r, double w,
                         double horizon = std::numeric_limits<double>::infinity());

/// Level used for the left-limit sets at "w-".
inline double left_limit_level(double w) {
  return w - 1e-9 * std::max(1.0, w < 0 ? -w : w);
}

struct JobProfile {
  double x;
  double w_x;  // sup of r over [0, x)
  double y_x;  // c0 at level w_x-
  double z_x;  // c0 at level w_x
};

JobProfile job_profile(const RankFunction& r, double x);
/// w_x(a) = sup of r over [a, x).
inline double worst_future_rank(const RankFunction& r, double x, double a) { return r.sup_over(a, x); }

// Structured-text policy format, one record per line:
//   label <text> / x_max <v> / tail_sup <v> <attained 0|1>
//   piece <start> <end> <v0> <slope> / spike <age> <rank>
std::string to_text(const RankFunction& r);
RankFunction from_text(const std::string& text);

/// CSV rows "age,rank" at the given ages (header included).
std::string to_csv(const RankFunction& r, const std::vector<double>& ages);

}  // namespace soaptail
