#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "soaptail/rng.hpp"

namespace soaptail {

enum class TailKind { NicelyLight, NicelyHeavy, Other };

struct TailClass {
  TailKind kind = TailKind::Other;
  // Matuszewska-index bracket; only meaningful for NicelyHeavy.
  double alpha = 0.0;
  double beta = 0.0;
};

struct Atom {
  double location;
  double mass;
};

// Limit of the mean residual life m(a) as a -> x_max. When strictly_below is
// set, m(a) < value for every age, so the limit is a supremum that is never
// attained.
struct ResidualLimit {
  double value;
  bool strictly_below;
};

// One concrete family of job-size distributions. Implementations live in
// distribution.cpp; users go through JobSizeDistribution.
class DistributionFamily {
 public:
  virtual ~DistributionFamily() = default;

  virtual std::string describe() const = 0;
  virtual double tail(double t) const = 0;
  // nullopt when the distribution has no density (pure atoms).
  virtual std::optional<double> density(double t) const = 0;
  virtual double x_max() const = 0;
  virtual double mean() const = 0;
  // E[exp(-sX)]; +infinity where the transform diverges.
  virtual double lst(double s) const = 0;
  virtual double lst_abscissa() const = 0;
  virtual TailClass tail_class() const = 0;
  virtual std::vector<Atom> atoms() const { return {}; }
  // Ages where the tail has a jump or a kink.
  virtual std::vector<double> breakpoints() const { return {}; }
  virtual std::optional<double> residual_life_closed_form(double) const { return std::nullopt; }
  virtual ResidualLimit residual_limit() const = 0;
  virtual double sample(RandomStream& rng) const = 0;
};

// Immutable handle to a job-size distribution; cheap to copy and safe to share
// across threads.
class JobSizeDistribution {
 public:
  explicit JobSizeDistribution(std::shared_ptr<const DistributionFamily> impl)
      : impl_(std::move(impl)) {}

  std::string describe() const { return impl_->describe(); }
  double tail(double t) const { return t < 0.0 ? 1.0 : impl_->tail(t); }
  std::optional<double> density(double t) const { return impl_->density(t); }
  double hazard(double t) const;
  double x_max() const { return impl_->x_max(); }
  double mean() const { return impl_->mean(); }
  double lst(double s) const { return impl_->lst(s); }
  double lst_abscissa() const { return impl_->lst_abscissa(); }
  TailClass tail_class() const { return impl_->tail_class(); }
  bool is_light() const { return tail_class().kind == TailKind::NicelyLight; }
  bool is_heavy() const { return tail_class().kind == TailKind::NicelyHeavy; }
  std::vector<Atom> atoms() const { return impl_->atoms(); }
  std::vector<double> breakpoints() const { return impl_->breakpoints(); }
  std::optional<double> residual_life_closed_form(double a) const {
    return impl_->residual_life_closed_form(a);
  }
  ResidualLimit residual_limit() const { return impl_->residual_limit(); }
  double sample(RandomStream& rng) const { return impl_->sample(rng); }

  const std::shared_ptr<const DistributionFamily>& family() const { return impl_; }

 private:
  std::shared_ptr<const DistributionFamily> impl_;
};

// Distribution name plus named parameter lists, e.g.
// {"hyperexponential", {{"p", {0.5, 0.5}}, {"mu", {2, 0.5}}}}.
struct DistributionSpec {
  std::string family;
  std::map<std::string, std::vector<double>> params;
};

JobSizeDistribution make_distribution(const DistributionSpec& spec);

namespace dist {
JobSizeDistribution exponential(double mu);
JobSizeDistribution hyperexponential(std::vector<double> p, std::vector<double> mu);
JobSizeDistribution uniform(double b);
JobSizeDistribution deterministic(double d);
JobSizeDistribution erlang(int k, double mu);
JobSizeDistribution pareto(double alpha, double xm);
JobSizeDistribution bounded_pareto(double alpha, double low, double high);
JobSizeDistribution weibull(double shape, double scale);
}  // namespace dist

struct SystemParams {
  double lambda;
  double rho;

  // Both throw UnstableConfig when rho >= 1.
  static SystemParams from_lambda(const JobSizeDistribution& d, double lambda);
  static SystemParams from_rho(const JobSizeDistribution& d, double rho);
};

/// Integral of the tail over [a, b]; b may be infinite.
double integrated_tail(const JobSizeDistribution& d, double a, double b);

/// m(a) = E[X - a | X > a] by quadrature of the tail.
double mean_residual_life(const JobSizeDistribution& d, double a);

/// The transform at s, +infinity when divergent. Never throws.
double lst_eval(const JobSizeDistribution& d, double s);
inline bool is_divergent(double transform_value) { return transform_value == HUGE_VAL; }

/// Distribution of min{X, a}. Returns d unchanged when a >= x_max.
JobSizeDistribution truncate(const JobSizeDistribution& d, double a);

// Age grid shared by the NBUE scan and the Gittins construction: linear
// spacing on [0, 1], logarithmic past 1, plus every distribution breakpoint.
struct AgeGridSpec {
  std::size_t knots = 2048;
  std::optional<double> horizon;  // default: see default_horizon
};

/// Age where the tail first drops below 1e-12, capped at 1e6; x_max when finite.
double default_horizon(const JobSizeDistribution& d);
std::vector<double> make_age_grid(const JobSizeDistribution& d, const AgeGridSpec& spec);

enum class NbueClass { Nbue, EnbueNotNbue, NotEnbue };
std::string to_string(NbueClass c);

struct NbueVerdict {
  NbueClass cls;
  double nbue_margin;                // min over a of (m(0) - m(a)) / m(0)
  std::optional<double> enbue_age;   // smallest a0 certifying ENBUE, when found
};

// Relative tolerance of the m-comparisons. Differences below kNbueNoiseFloor
// count as ties; those between the floor and the tolerance are inconclusive.
inline constexpr double kNbueTolerance = 1e-6;
inline constexpr double kNbueNoiseFloor = 1e-9;

NbueVerdict classify_nbue(const JobSizeDistribution& d, const AgeGridSpec& grid = {});

}  // namespace soaptail
