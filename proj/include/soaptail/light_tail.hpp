#pragma once

#include <array>
#include <optional>
#include <string>

#include "soaptail/distribution.hpp"

namespace soaptail {

/// sigma^{-1}(s) = s - lambda (1 - X~(s)); +infinity where X~ diverges.
double sigma_inv(const JobSizeDistribution& d, const SystemParams& p, double s);

/// Origin-branch inverse of sigma^{-1}: the root u >= argmin of sigma^{-1}(u) = s.
/// Returns -infinity for s below the minimum of sigma^{-1} (outside the branch).
double sigma(const JobSizeDistribution& d, const SystemParams& p, double s);

struct Bracket {
  double lo;
  double hi;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

// s * W~(gamma_W + s) at s = 1e-3, 1e-4, 1e-5. A first-order pole shows up as
// a finite, nonzero, settling product.
struct PoleDiagnostic {
  std::array<double, 3> s{1e-3, 1e-4, 1e-5};
  std::array<double, 3> product{};
  double drift = 0.0;  // |product[2] - product[0]| / |product[2]|
  bool first_order = false;
};

struct GammaW {
  double value;
  Bracket bracket;
  PoleDiagnostic pole;
};
GammaW gamma_W(const JobSizeDistribution& d, const SystemParams& p);

// gamma_sigma is gamma(sigma) = min over s of sigma^{-1}(s); sigma_at_gamma is
// sigma(gamma(sigma)), i.e. the location of that minimum.
struct GammaSigma {
  double gamma_sigma;
  double sigma_at_gamma;
  Bracket value_bracket;
};
GammaSigma gamma_sigma(const JobSizeDistribution& d, const SystemParams& p);

// gamma(W~ o sigma_Y): W~ built from X, sigma_Y from Y with the same lambda.
struct Composition {
  double value;
  Bracket bracket;
  bool hits_gamma_W;   // sigma_Y reaches gamma(W~) first
  bool branch_point;   // the two singularities coincide within 1e-10
};
Composition gamma_composition(const JobSizeDistribution& x, const JobSizeDistribution& y,
                              const SystemParams& p);

enum class Verdict { LogTailOptimal, LogTailIntermediate, LogTailPessimal };
std::string to_string(Verdict v);

Verdict classify_soap(double a_star, double x_max);

struct LightTailReport {
  double gamma_X;
  GammaW gamma_W;
  GammaSigma sigma;
  double d_fcfs;
  Bracket d_fcfs_bracket;
  double d_fb;
  Bracket d_fb_bracket;
  std::optional<double> a_star;
  std::optional<double> d_policy;
  std::optional<Bracket> d_policy_bracket;
  std::optional<Verdict> verdict;
  bool branch_point = false;
};

/// Decay rates of FCFS, FB and, when a_star is given, the step/spike policy
/// with that worst age (both share the rate of min{X, a*}).
LightTailReport decay_rates(const JobSizeDistribution& d, const SystemParams& p,
                            std::optional<double> a_star = std::nullopt);

struct GittinsVerdict {
  Verdict verdict;
  NbueVerdict nbue;
  double worst_age;   // of the computed Gittins rank function
  Verdict by_worst_age;
  bool agrees() const { return verdict == by_worst_age; }
};
GittinsVerdict classify_gittins(const JobSizeDistribution& d);

}  // namespace soaptail
