#include "soaptail/light_tail.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "soaptail/errors.hpp"
#include "soaptail/gittins.hpp"
#include "soaptail/rank_function.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvPhi = 0.6180339887498949;
constexpr double kBranchTol = 1e-10;

void require_light(const JobSizeDistribution& d) {
  if (!d.is_light()) throw ClassMismatch("light-tail analysis needs a nicely light-tailed distribution, got " + d.describe());
}

// Bisection for an increasing function crossing zero on [lo, hi].
Bracket bisect_increasing(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return {lo, hi};
}

struct SigmaMin {
  double argmin;
  double value;
  Bracket values;  // sigma^{-1} at the ends of the final golden bracket
};

SigmaMin minimise_sigma_inv(const JobSizeDistribution& d, const SystemParams& p) {
  auto f = [&](double s) { return sigma_inv(d, p, s); };
  double lo = d.lst_abscissa();
  if (std::isinf(lo)) {
    // sigma^{-1} is convex: once f(L) >= f(L/2) the minimum lies right of L.
    lo = -1.0;
    int guard = 0;
    while (f(lo) < f(0.5 * lo)) {
      lo *= 2.0;
      if (++guard > 200) throw BracketFailure("sigma^{-1} has no minimum on the negative axis");
    }
  }
  double hi = 0.0;
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 400 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double argmin = f1 <= f2 ? x1 : x2;
  const double value = std::min(f1, f2);
  if (!(value < 0.0) || !std::isfinite(value))
    throw BracketFailure("sigma^{-1} minimum is not negative; Class-I assumptions fail for " + d.describe());
  const double spread = std::max(std::abs(f(lo) - value), std::abs(f(hi) - value));
  return {argmin, value, {value - spread, value}};
}

double sigma_on_branch(const JobSizeDistribution& d, const SystemParams& p, const SigmaMin& m, double s) {
  if (s < m.value) return -kInf;
  if (s == 0.0) return 0.0;
  auto g = [&](double u) { return sigma_inv(d, p, u) - s; };
  const Bracket b = s < 0.0 ? bisect_increasing(g, m.argmin, 0.0) : bisect_increasing(g, s, s / (1.0 - p.rho));
  return b.mid();
}

}  // namespace

double sigma_inv(const JobSizeDistribution& d, const SystemParams& p, double s) {
  const double t = lst_eval(d, s);
  if (is_divergent(t)) return kInf;
  return s - p.lambda * (1.0 - t);
}

double sigma(const JobSizeDistribution& d, const SystemParams& p, double s) {
  return sigma_on_branch(d, p, minimise_sigma_inv(d, p), s);
}

GammaSigma gamma_sigma(const JobSizeDistribution& d, const SystemParams& p) {
  require_light(d);
  const SigmaMin m = minimise_sigma_inv(d, p);
  return {m.value, m.argmin, m.values};
}

GammaW gamma_W(const JobSizeDistribution& d, const SystemParams& p) {
  require_light(d);
  const SigmaMin m = minimise_sigma_inv(d, p);
  auto f = [&](double s) { return sigma_inv(d, p, s); };
  // Walk left of the minimum until sigma^{-1} turns positive.
  const double ga = d.lst_abscissa();
  double lo = m.argmin;
  bool found = false;
  for (int k = 1; k <= 200 && !found; ++k) {
    lo = std::isinf(ga) ? m.argmin - std::ldexp(1.0, k - 1) : ga + (m.argmin - ga) * std::ldexp(1.0, -k);
    found = f(lo) > 0.0;
  }
  if (!found) throw BracketFailure("no sign change of sigma^{-1} left of its minimum for " + d.describe());
  // sigma^{-1} is decreasing on [lo, argmin]; bisect on its negation.
  const Bracket b = bisect_increasing([&](double s) { return -f(s); }, lo, m.argmin);
  GammaW out{b.mid(), b, {}};

  PoleDiagnostic& pd = out.pole;
  for (std::size_t i = 0; i < pd.s.size(); ++i) {
    const double s = out.value + pd.s[i];
    const double w = s * (1.0 - p.rho) / f(s);
    pd.product[i] = pd.s[i] * w;
  }
  pd.drift = std::abs(pd.product[2] - pd.product[0]) / std::abs(pd.product[2]);
  pd.first_order = std::isfinite(pd.product[2]) && pd.product[2] != 0.0 && pd.drift < 0.02;
  return out;
}

Composition gamma_composition(const JobSizeDistribution& x, const JobSizeDistribution& y, const SystemParams& p) {
  require_light(x);
  require_light(y);
  const GammaW gw = gamma_W(x, p);
  const SigmaMin my = minimise_sigma_inv(y, p);
  if (std::abs(my.argmin - gw.value) <= kBranchTol) return {my.value, my.values, false, true};
  if (my.argmin < gw.value) {
    // sigma_Y runs into the pole of W~ at s* = sigma_Y^{-1}(gamma_W), which is
    // increasing in its argument there.
    const double v = sigma_inv(y, p, gw.value);
    return {v, {sigma_inv(y, p, gw.bracket.lo), sigma_inv(y, p, gw.bracket.hi)}, true, false};
  }
  return {my.value, my.values, false, false};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::LogTailOptimal: return "LogTailOptimal";
    case Verdict::LogTailIntermediate: return "LogTailIntermediate";
    case Verdict::LogTailPessimal: return "LogTailPessimal";
  }
  return "?";
}

Verdict classify_soap(double a_star, double x_max) {
  if (a_star < 0.0 || a_star > x_max) throw DomainError("worst age must lie in [0, x_max]");
  if (a_star == 0.0) return Verdict::LogTailOptimal;
  if (a_star == x_max) return Verdict::LogTailPessimal;
  return Verdict::LogTailIntermediate;
}

LightTailReport decay_rates(const JobSizeDistribution& d, const SystemParams& p, std::optional<double> a_star) {
  require_light(d);
  LightTailReport rep{};
  rep.gamma_X = d.lst_abscissa();
  rep.gamma_W = gamma_W(d, p);
  rep.sigma = gamma_sigma(d, p);
  rep.d_fcfs = -rep.gamma_W.value;
  rep.d_fcfs_bracket = {-rep.gamma_W.bracket.hi, -rep.gamma_W.bracket.lo};
  const Composition fb = gamma_composition(d, d, p);
  rep.d_fb = -fb.value;
  rep.d_fb_bracket = {-fb.bracket.hi, -fb.bracket.lo};
  rep.branch_point = fb.branch_point;
  if (a_star) {
    rep.a_star = *a_star;
    rep.verdict = classify_soap(*a_star, d.x_max());
    if (*a_star == 0.0) {
      rep.d_policy = rep.d_fcfs;
      rep.d_policy_bracket = rep.d_fcfs_bracket;
    } else if (*a_star >= d.x_max()) {
      rep.d_policy = rep.d_fb;
      rep.d_policy_bracket = rep.d_fb_bracket;
    } else {
      const Composition c = gamma_composition(d, truncate(d, *a_star), p);
      rep.d_policy = -c.value;
      rep.d_policy_bracket = Bracket{-c.bracket.hi, -c.bracket.lo};
      rep.branch_point = rep.branch_point || c.branch_point;
    }
  }
  return rep;
}

GittinsVerdict classify_gittins(const JobSizeDistribution& d) {
  require_light(d);
  GittinsVerdict out{};
  out.nbue = classify_nbue(d);
  switch (out.nbue.cls) {
    case NbueClass::Nbue: out.verdict = Verdict::LogTailOptimal; break;
    case NbueClass::EnbueNotNbue: out.verdict = Verdict::LogTailIntermediate; break;
    case NbueClass::NotEnbue: out.verdict = Verdict::LogTailPessimal; break;
  }
  out.worst_age = worst_age(build_gittins(d));
  out.by_worst_age = classify_soap(out.worst_age, d.x_max());
  return out;
}

}  // namespace soaptail
