#include "soaptail/distribution.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "soaptail/errors.hpp"
#include "soaptail/format.hpp"
#include "soaptail/quadrature.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const QuadOptions kLstQuad{1e-14, 1e-12, 4000};
const QuadOptions kTailQuad{1e-13, 1e-11, 4000};

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw InvalidParameter(field, what);
}

// 1 - s * int_0^xmax e^{-st} tail(t) dt; valid wherever the integral converges.
double lst_by_quadrature(const DistributionFamily& f, double s) {
  if (s == 0.0) return 1.0;
  auto integrand = [&](double t) {
    const double tail = f.tail(t);
    return tail == 0.0 ? 0.0 : std::exp(-s * t) * tail;
  };
  const auto cuts = f.breakpoints();
  return 1.0 - s * integrate(integrand, 0.0, f.x_max(), cuts, kLstQuad);
}

class Exponential final : public DistributionFamily {
 public:
  explicit Exponential(double mu) : mu_(mu) { require(mu > 0, "mu", "rate must be positive"); }
  std::string describe() const override { return "exponential(mu=" + format_double(mu_) + ")"; }
  double tail(double t) const override { return std::exp(-mu_ * t); }
  std::optional<double> density(double t) const override { return mu_ * std::exp(-mu_ * t); }
  double x_max() const override { return kInf; }
  double mean() const override { return 1.0 / mu_; }
  double lst(double s) const override { return s <= -mu_ ? kInf : mu_ / (mu_ + s); }
  double lst_abscissa() const override { return -mu_; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::optional<double> residual_life_closed_form(double) const override { return 1.0 / mu_; }
  ResidualLimit residual_limit() const override { return {1.0 / mu_, false}; }
  double sample(RandomStream& rng) const override { return rng.exponential(mu_); }

 private:
  double mu_;
};

class Hyperexponential final : public DistributionFamily {
 public:
  Hyperexponential(std::vector<double> p, std::vector<double> mu) : p_(std::move(p)), mu_(std::move(mu)) {
    require(!p_.empty() && p_.size() == mu_.size(), "p", "need one probability per rate");
    double total = 0.0;
    for (double v : p_) {
      require(v >= 0.0, "p", "probabilities must be non-negative");
      total += v;
    }
    require(std::abs(total - 1.0) < 1e-9, "p", "probabilities must sum to 1");
    for (double v : mu_) require(v > 0.0, "mu", "rates must be positive");
    mu_min_ = kInf;
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (p_[i] > 0.0) mu_min_ = std::min(mu_min_, mu_[i]);
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (p_[i] > 0.0 && mu_[i] != mu_min_) distinct_rates_ = true;
  }
  std::string describe() const override {
    return "hyperexponential(p=" + format_list(p_) + ";mu=" + format_list(mu_) + ")";
  }
  double tail(double t) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) s += p_[i] * std::exp(-mu_[i] * t);
    return s;
  }
  std::optional<double> density(double t) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) s += p_[i] * mu_[i] * std::exp(-mu_[i] * t);
    return s;
  }
  double x_max() const override { return kInf; }
  double mean() const override {
    double s = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) s += p_[i] / mu_[i];
    return s;
  }
  double lst(double s) const override {
    if (s <= -mu_min_) return kInf;
    double v = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) v += p_[i] * mu_[i] / (mu_[i] + s);
    return v;
  }
  double lst_abscissa() const override { return -mu_min_; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::optional<double> residual_life_closed_form(double a) const override {
    // Weights rescaled by exp(mu_min * a) to stay representable at large ages.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const double w = p_[i] * std::exp(-(mu_[i] - mu_min_) * a);
      num += w / mu_[i];
      den += w;
    }
    return num / den;
  }
  ResidualLimit residual_limit() const override { return {1.0 / mu_min_, distinct_rates_}; }
  double sample(RandomStream& rng) const override {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t branch = p_.size() - 1;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      acc += p_[i];
      if (u < acc) {
        branch = i;
        break;
      }
    }
    return rng.exponential(mu_[branch]);
  }

 private:
  std::vector<double> p_, mu_;
  double mu_min_ = kInf;
  bool distinct_rates_ = false;
};

class Uniform final : public DistributionFamily {
 public:
  explicit Uniform(double b) : b_(b) { require(b > 0, "b", "upper bound must be positive"); }
  std::string describe() const override { return "uniform(b=" + format_double(b_) + ")"; }
  double tail(double t) const override { return t >= b_ ? 0.0 : 1.0 - t / b_; }
  std::optional<double> density(double t) const override { return t < b_ ? 1.0 / b_ : 0.0; }
  double x_max() const override { return b_; }
  double mean() const override { return 0.5 * b_; }
  double lst(double s) const override {
    if (s == 0.0) return 1.0;
    return -std::expm1(-s * b_) / (s * b_);
  }
  double lst_abscissa() const override { return -kInf; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::vector<double> breakpoints() const override { return {b_}; }
  std::optional<double> residual_life_closed_form(double a) const override { return 0.5 * (b_ - a); }
  ResidualLimit residual_limit() const override { return {0.0, false}; }
  double sample(RandomStream& rng) const override { return b_ * rng.uniform(); }

 private:
  double b_;
};

class Deterministic final : public DistributionFamily {
 public:
  explicit Deterministic(double d) : d_(d) { require(d > 0, "d", "size must be positive"); }
  std::string describe() const override { return "deterministic(d=" + format_double(d_) + ")"; }
  double tail(double t) const override { return t < d_ ? 1.0 : 0.0; }
  std::optional<double> density(double) const override { return std::nullopt; }
  double x_max() const override { return d_; }
  double mean() const override { return d_; }
  double lst(double s) const override { return std::exp(-s * d_); }
  double lst_abscissa() const override { return -kInf; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::vector<Atom> atoms() const override { return {{d_, 1.0}}; }
  std::vector<double> breakpoints() const override { return {d_}; }
  std::optional<double> residual_life_closed_form(double a) const override { return d_ - a; }
  ResidualLimit residual_limit() const override { return {0.0, false}; }
  double sample(RandomStream&) const override { return d_; }

 private:
  double d_;
};

class Erlang final : public DistributionFamily {
 public:
  Erlang(int k, double mu) : k_(k), mu_(mu) {
    require(k >= 1, "k", "shape must be a positive integer");
    require(mu > 0, "mu", "rate must be positive");
  }
  std::string describe() const override {
    return "erlang(k=" + std::to_string(k_) + ";mu=" + format_double(mu_) + ")";
  }
  double tail(double t) const override {
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < k_; ++j) {
      term *= mu_ * t / j;
      sum += term;
    }
    return std::exp(-mu_ * t) * sum;
  }
  std::optional<double> density(double t) const override {
    if (t < 0) return 0.0;
    return std::exp(k_ * std::log(mu_) + (k_ - 1) * std::log(t) - mu_ * t - std::lgamma(k_));
  }
  double x_max() const override { return kInf; }
  double mean() const override { return k_ / mu_; }
  double lst(double s) const override { return s <= -mu_ ? kInf : std::pow(mu_ / (mu_ + s), k_); }
  double lst_abscissa() const override { return -mu_; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::optional<double> residual_life_closed_form(double a) const override {
    // int_a^inf tail = e^{-mu a}/mu * sum_j (k - j) (mu a)^j / j!
    double term = 1.0, num = k_, den = 1.0;
    for (int j = 1; j < k_; ++j) {
      term *= mu_ * a / j;
      num += (k_ - j) * term;
      den += term;
    }
    return num / (mu_ * den);
  }
  ResidualLimit residual_limit() const override { return {1.0 / mu_, false}; }
  double sample(RandomStream& rng) const override {
    double s = 0.0;
    for (int j = 0; j < k_; ++j) s += rng.exponential(mu_);
    return s;
  }

 private:
  int k_;
  double mu_;
};

class Pareto final : public DistributionFamily {
 public:
  Pareto(double alpha, double xm) : alpha_(alpha), xm_(xm) {
    require(alpha > 1.0, "alpha", "shape must exceed 1 for a finite mean");
    require(xm > 0.0, "xm", "scale must be positive");
  }
  std::string describe() const override {
    return "pareto(alpha=" + format_double(alpha_) + ";xm=" + format_double(xm_) + ")";
  }
  double tail(double t) const override { return t < xm_ ? 1.0 : std::pow(xm_ / t, alpha_); }
  std::optional<double> density(double t) const override {
    return t < xm_ ? 0.0 : alpha_ / t * std::pow(xm_ / t, alpha_);
  }
  double x_max() const override { return kInf; }
  double mean() const override { return alpha_ * xm_ / (alpha_ - 1.0); }
  double lst(double s) const override { return s < 0.0 ? kInf : lst_by_quadrature(*this, s); }
  double lst_abscissa() const override { return 0.0; }
  TailClass tail_class() const override { return {TailKind::NicelyHeavy, alpha_, alpha_}; }
  std::vector<double> breakpoints() const override { return {xm_}; }
  std::optional<double> residual_life_closed_form(double a) const override {
    if (a < xm_) return (xm_ - a) + xm_ / (alpha_ - 1.0);
    return a / (alpha_ - 1.0);
  }
  ResidualLimit residual_limit() const override { return {kInf, true}; }
  double sample(RandomStream& rng) const override { return xm_ * std::pow(rng.uniform(), -1.0 / alpha_); }

 private:
  double alpha_, xm_;
};

class BoundedPareto final : public DistributionFamily {
 public:
  BoundedPareto(double alpha, double low, double high) : alpha_(alpha), low_(low), high_(high) {
    require(alpha > 0.0, "alpha", "shape must be positive");
    require(low > 0.0, "low", "lower bound must be positive");
    require(high > low, "high", "upper bound must exceed the lower bound");
    norm_ = 1.0 - std::pow(low_ / high_, alpha_);
  }
  std::string describe() const override {
    return "bounded_pareto(alpha=" + format_double(alpha_) + ";low=" + format_double(low_) +
           ";high=" + format_double(high_) + ")";
  }
  double tail(double t) const override {
    if (t < low_) return 1.0;
    if (t >= high_) return 0.0;
    return (std::pow(low_ / t, alpha_) - std::pow(low_ / high_, alpha_)) / norm_;
  }
  std::optional<double> density(double t) const override {
    if (t < low_ || t >= high_) return 0.0;
    return alpha_ / t * std::pow(low_ / t, alpha_) / norm_;
  }
  double x_max() const override { return high_; }
  double mean() const override { return low_ + tail_integral(low_); }
  double lst(double s) const override { return lst_by_quadrature(*this, s); }
  double lst_abscissa() const override { return -kInf; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::vector<double> breakpoints() const override { return {low_, high_}; }
  std::optional<double> residual_life_closed_form(double a) const override {
    if (a < low_) return (low_ - a) + tail_integral(low_);
    return tail_integral(a) / tail(a);
  }
  ResidualLimit residual_limit() const override { return {0.0, false}; }
  double sample(RandomStream& rng) const override {
    return low_ * std::pow(1.0 - rng.uniform() * norm_, -1.0 / alpha_);
  }

 private:
  // int_a^high tail(t) dt for a in [low, high).
  double tail_integral(double a) const {
    const double la = std::pow(low_, alpha_);
    double power_part;
    if (std::abs(alpha_ - 1.0) < 1e-12)
      power_part = la * std::log(high_ / a);
    else
      power_part = la * (std::pow(a, 1.0 - alpha_) - std::pow(high_, 1.0 - alpha_)) / (alpha_ - 1.0);
    return (power_part - la * std::pow(high_, -alpha_) * (high_ - a)) / norm_;
  }

  double alpha_, low_, high_, norm_;
};

class Weibull final : public DistributionFamily {
 public:
  Weibull(double shape, double scale) : k_(shape), scale_(scale) {
    require(shape > 0.0, "shape", "shape must be positive");
    require(scale > 0.0, "scale", "scale must be positive");
  }
  std::string describe() const override {
    return "weibull(shape=" + format_double(k_) + ";scale=" + format_double(scale_) + ")";
  }
  double tail(double t) const override { return std::exp(-std::pow(t / scale_, k_)); }
  std::optional<double> density(double t) const override {
    if (t <= 0.0) return k_ < 1.0 ? kInf : (k_ == 1.0 ? 1.0 / scale_ : 0.0);
    const double z = std::pow(t / scale_, k_);
    return k_ / t * z * std::exp(-z);
  }
  double x_max() const override { return kInf; }
  double mean() const override { return scale_ * std::tgamma(1.0 + 1.0 / k_); }
  double lst(double s) const override {
    if (s < lst_abscissa() || (s == lst_abscissa() && s < 0.0)) return kInf;
    if (s < 0.0 && k_ < 1.0) return kInf;
    return lst_by_quadrature(*this, s);
  }
  double lst_abscissa() const override {
    if (k_ < 1.0) return 0.0;
    if (k_ == 1.0) return -1.0 / scale_;
    return -kInf;
  }
  TailClass tail_class() const override {
    return {k_ >= 1.0 ? TailKind::NicelyLight : TailKind::Other};
  }
  std::optional<double> residual_life_closed_form(double a) const override {
    // int_a^inf exp(-(t/scale)^k) dt = scale/k * Gamma(1/k, (a/scale)^k)
    const double z = std::pow(a / scale_, k_);
    const double upper = boost::math::tgamma(1.0 / k_, z);
    return scale_ / k_ * upper * std::exp(z);
  }
  ResidualLimit residual_limit() const override {
    if (k_ < 1.0) return {kInf, true};
    if (k_ == 1.0) return {scale_, false};
    return {0.0, false};
  }
  double sample(RandomStream& rng) const override {
    return scale_ * std::pow(-std::log(rng.uniform()), 1.0 / k_);
  }

 private:
  double k_, scale_;
};

class Truncated final : public DistributionFamily {
 public:
  Truncated(JobSizeDistribution parent, double cap) : parent_(std::move(parent)), cap_(cap) {
    const auto cuts = breakpoints();
    mean_ = integrate([this](double t) { return parent_.tail(t); }, 0.0, cap_, cuts,
                      QuadOptions{1e-15, 1e-13, 4000});
  }
  std::string describe() const override { return "min(" + parent_.describe() + "," + format_double(cap_) + ")"; }
  double tail(double t) const override { return t >= cap_ ? 0.0 : parent_.tail(t); }
  std::optional<double> density(double t) const override {
    if (t >= cap_) return 0.0;
    return parent_.density(t);
  }
  double x_max() const override { return cap_; }
  double mean() const override { return mean_; }
  double lst(double s) const override { return lst_by_quadrature(*this, s); }
  double lst_abscissa() const override { return -kInf; }
  TailClass tail_class() const override { return {TailKind::NicelyLight}; }
  std::vector<Atom> atoms() const override {
    std::vector<Atom> out;
    for (const Atom& a : parent_.atoms())
      if (a.location < cap_) out.push_back(a);
    const double mass = parent_.tail(cap_);
    if (mass > 0.0) out.push_back({cap_, mass});
    return out;
  }
  std::vector<double> breakpoints() const override {
    std::vector<double> out;
    for (double b : parent_.breakpoints())
      if (b < cap_) out.push_back(b);
    out.push_back(cap_);
    return out;
  }
  ResidualLimit residual_limit() const override { return {0.0, false}; }
  double sample(RandomStream& rng) const override { return std::min(parent_.sample(rng), cap_); }

 private:
  JobSizeDistribution parent_;
  double cap_;
  double mean_ = 0.0;
};

std::vector<double> param(const DistributionSpec& spec, const char* name, std::size_t count = 1) {
  auto it = spec.params.find(name);
  if (it == spec.params.end())
    throw InvalidParameter(name, "missing for distribution '" + spec.family + "'");
  if (count && it->second.size() != count)
    throw InvalidParameter(name, "expected " + std::to_string(count) + " value(s)");
  return it->second;
}

}  // namespace

double JobSizeDistribution::hazard(double t) const {
  const double tl = tail(t);
  if (tl <= 0.0) return kInf;
  const auto f = density(t);
  return f ? *f / tl : 0.0;
}

namespace dist {
JobSizeDistribution exponential(double mu) { return JobSizeDistribution(std::make_shared<Exponential>(mu)); }
JobSizeDistribution hyperexponential(std::vector<double> p, std::vector<double> mu) {
  return JobSizeDistribution(std::make_shared<Hyperexponential>(std::move(p), std::move(mu)));
}
JobSizeDistribution uniform(double b) { return JobSizeDistribution(std::make_shared<Uniform>(b)); }
JobSizeDistribution deterministic(double d) { return JobSizeDistribution(std::make_shared<Deterministic>(d)); }
JobSizeDistribution erlang(int k, double mu) { return JobSizeDistribution(std::make_shared<Erlang>(k, mu)); }
JobSizeDistribution pareto(double alpha, double xm) { return JobSizeDistribution(std::make_shared<Pareto>(alpha, xm)); }
JobSizeDistribution bounded_pareto(double alpha, double low, double high) {
  return JobSizeDistribution(std::make_shared<BoundedPareto>(alpha, low, high));
}
JobSizeDistribution weibull(double shape, double scale) {
  return JobSizeDistribution(std::make_shared<Weibull>(shape, scale));
}
}  // namespace dist

JobSizeDistribution make_distribution(const DistributionSpec& spec) {
  const std::string& f = spec.family;
  if (f == "exponential" || f == "exp") return dist::exponential(param(spec, "mu")[0]);
  if (f == "hyperexponential" || f == "hyperexp")
    return dist::hyperexponential(param(spec, "p", 0), param(spec, "mu", 0));
  if (f == "uniform") return dist::uniform(param(spec, "b")[0]);
  if (f == "deterministic" || f == "det") return dist::deterministic(param(spec, "d")[0]);
  if (f == "erlang") {
    const double k = param(spec, "k")[0];
    if (k != std::floor(k)) throw InvalidParameter("k", "shape must be an integer");
    return dist::erlang(static_cast<int>(k), param(spec, "mu")[0]);
  }
  if (f == "pareto") return dist::pareto(param(spec, "alpha")[0], param(spec, "xm")[0]);
  if (f == "bounded_pareto")
    return dist::bounded_pareto(param(spec, "alpha")[0], param(spec, "low")[0], param(spec, "high")[0]);
  if (f == "weibull") return dist::weibull(param(spec, "shape")[0], param(spec, "scale")[0]);
  throw InvalidParameter("family", "unknown distribution '" + f + "'");
}

SystemParams SystemParams::from_lambda(const JobSizeDistribution& d, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("lambda", "arrival rate must be positive");
  const double rho = lambda * d.mean();
  if (!(rho < 1.0)) throw UnstableConfig("load rho = " + format_double(rho) + " is not below 1");
  return {lambda, rho};
}

SystemParams SystemParams::from_rho(const JobSizeDistribution& d, double rho) {
  if (!(rho > 0.0)) throw InvalidParameter("rho", "load must be positive");
  if (!(rho < 1.0)) throw UnstableConfig("load rho = " + format_double(rho) + " is not below 1");
  return {rho / d.mean(), rho};
}

double integrated_tail(const JobSizeDistribution& d, double a, double b) {
  b = std::min(b, d.x_max());
  if (!(b > a)) return 0.0;
  const auto cuts = d.breakpoints();
  return integrate([&](double t) { return d.tail(t); }, a, b, cuts, kTailQuad);
}

double mean_residual_life(const JobSizeDistribution& d, double a) {
  const double tail_a = d.tail(a);
  if (!(tail_a > 0.0) || a >= d.x_max()) throw PastSupport(a);
  if (a <= 0.0) return d.mean();
  return integrated_tail(d, a, d.x_max()) / tail_a;
}

double lst_eval(const JobSizeDistribution& d, double s) {
  if (s == 0.0) return 1.0;
  return d.lst(s);
}

JobSizeDistribution truncate(const JobSizeDistribution& d, double a) {
  if (!(a > 0.0)) throw InvalidParameter("a", "truncation age must be positive");
  if (a >= d.x_max()) return d;
  return JobSizeDistribution(std::make_shared<Truncated>(d, a));
}

double default_horizon(const JobSizeDistribution& d) {
  if (std::isfinite(d.x_max())) return d.x_max();
  constexpr double kCap = 1e6;
  constexpr double kTailLevel = 1e-12;
  double hi = 1.0;
  while (d.tail(hi) >= kTailLevel) {
    hi *= 2.0;
    if (hi >= kCap) return kCap;
  }
  double lo = hi / 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (d.tail(mid) >= kTailLevel ? lo : hi) = mid;
  }
  return hi;
}

std::vector<double> make_age_grid(const JobSizeDistribution& d, const AgeGridSpec& spec) {
  if (spec.knots < 2) throw InvalidParameter("knots", "grid needs at least two knots");
  const double horizon = spec.horizon ? std::min(*spec.horizon, d.x_max()) : default_horizon(d);
  if (!(horizon > 0.0)) throw InvalidParameter("horizon", "grid horizon must be positive");
  std::vector<double> ages;
  const std::size_t n = spec.knots;
  if (horizon <= 1.0) {
    for (std::size_t i = 0; i < n; ++i) ages.push_back(horizon * static_cast<double>(i) / (n - 1));
  } else {
    const std::size_t n_lin = std::max<std::size_t>(2, n / 4);
    const std::size_t n_log = n - n_lin;
    for (std::size_t i = 0; i < n_lin; ++i) ages.push_back(static_cast<double>(i) / (n_lin - 1));
    const double log_h = std::log(horizon);
    for (std::size_t i = 1; i <= n_log; ++i) ages.push_back(std::exp(log_h * static_cast<double>(i) / n_log));
    ages.back() = horizon;
  }
  for (double b : d.breakpoints())
    if (b > 0.0 && b <= horizon) ages.push_back(b);
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end(),
                         [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y)); }),
             ages.end());
  return ages;
}

std::string to_string(NbueClass c) {
  switch (c) {
    case NbueClass::Nbue: return "NBUE";
    case NbueClass::EnbueNotNbue: return "ENBUE_not_NBUE";
    case NbueClass::NotEnbue: return "not_ENBUE";
  }
  return "?";
}

NbueVerdict classify_nbue(const JobSizeDistribution& d, const AgeGridSpec& grid) {
  if (d.tail_class().kind != TailKind::NicelyLight && !std::isfinite(d.x_max()))
    throw ClassMismatch("NBUE classification needs a light-tailed or bounded distribution");
  std::vector<double> ages;
  for (double a : make_age_grid(d, grid))
    if (a < d.x_max() && d.tail(a) > 0.0) ages.push_back(a);
  std::vector<double> m(ages.size());
  for (std::size_t i = 0; i < ages.size(); ++i) {
    const auto closed = d.residual_life_closed_form(ages[i]);
    m[i] = closed ? *closed : mean_residual_life(d, ages[i]);
  }
  const ResidualLimit limit = d.residual_limit();
  const double m0 = m.front();

  // Three-way outcome of a relative margin.
  enum class Cmp { Pass, Borderline, Fail };
  auto judge = [](double margin) {
    if (margin >= -kNbueNoiseFloor) return Cmp::Pass;
    if (margin < -kNbueTolerance) return Cmp::Fail;
    return Cmp::Borderline;
  };

  double nbue_margin = kInf;
  for (double v : m) nbue_margin = std::min(nbue_margin, (m0 - v) / m0);
  nbue_margin = std::min(nbue_margin, std::isinf(limit.value) ? -kInf : (m0 - limit.value) / m0);
  const Cmp nbue = judge(nbue_margin);
  if (nbue == Cmp::Pass) return {NbueClass::Nbue, nbue_margin, 0.0};

  // ENBUE: some a0 with m(a0) >= m(a) for all later grid ages and the tail limit.
  std::vector<double> suffix_max(m.size());
  double run = -kInf;
  for (std::size_t i = m.size(); i-- > 0;) {
    suffix_max[i] = run;
    run = std::max(run, m[i]);
  }
  const bool limit_blocks = std::isinf(limit.value) || limit.strictly_below;
  double best = -kInf;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double margin = (m[i] - suffix_max[i]) / m[i];
    if (std::isinf(suffix_max[i])) margin = kInf;  // last grid age
    if (limit_blocks) continue;
    margin = std::min(margin, (m[i] - limit.value) / m[i]);
    if (judge(margin) == Cmp::Pass) {
      if (nbue == Cmp::Borderline)
        throw Inconclusive("NBUE test within tolerance band", nbue_margin);
      return {NbueClass::EnbueNotNbue, nbue_margin, ages[i]};
    }
    best = std::max(best, margin);
  }
  if (nbue == Cmp::Borderline) throw Inconclusive("NBUE test within tolerance band", nbue_margin);
  if (judge(best) == Cmp::Borderline) throw Inconclusive("ENBUE test within tolerance band", best);
  return {NbueClass::NotEnbue, nbue_margin, std::nullopt};
}

}  // namespace soaptail
