#pragma once

// Reference computations for the tests. Nothing here calls into the library:
// integrals use adaptive Simpson, roots use secant/bisection, random draws
// use std::mt19937_64 with inverse transforms written out below.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson on a finite interval.
inline double simpson(const std::function<double(double)>& f, double a, double b, double eps = 1e-12) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, eps, 40);
}

/// Simpson on [a, inf) by splitting into doubling blocks until they stop mattering.
inline double simpson_to_inf(const std::function<double(double)>& f, double a, double eps = 1e-12) {
  double total = 0.0, lo = a, width = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double part = simpson(f, lo, lo + width, eps);
    total += part;
    if (std::abs(part) < eps * 1e-3 && k > 4) break;
    lo += width;
    width *= 2.0;
  }
  return total;
}

// Closed-form survival functions written independently of the library.
inline std::function<double(double)> exp_tail(double mu) {
  return [mu](double t) { return t < 0 ? 1.0 : std::exp(-mu * t); };
}
inline std::function<double(double)> hyper_tail(std::vector<double> p, std::vector<double> mu) {
  return [p, mu](double t) {
    if (t < 0) return 1.0;
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::exp(-mu[i] * t);
    return s;
  };
}
inline std::function<double(double)> uniform_tail(double b) {
  return [b](double t) { return t < 0 ? 1.0 : t >= b ? 0.0 : 1.0 - t / b; };
}
inline std::function<double(double)> pareto_tail(double alpha, double xm) {
  return [alpha, xm](double t) { return t < xm ? 1.0 : std::pow(xm / t, alpha); };
}
inline std::function<double(double)> erlang_tail(int k, double mu) {
  return [k, mu](double t) {
    if (t < 0) return 1.0;
    double term = 1.0, s = 1.0;
    for (int i = 1; i < k; ++i) {
      term *= mu * t / i;
      s += term;
    }
    return std::exp(-mu * t) * s;
  };
}

/// Mean residual life of a hyperexponential mixture in closed form.
inline double hyper_mrl(const std::vector<double>& p, const std::vector<double>& mu, double a) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    num += p[i] * std::exp(-mu[i] * a) / mu[i];
    den += p[i] * std::exp(-mu[i] * a);
  }
  return num / den;
}

/// d/da of hyper_mrl, differentiated by hand.
inline double hyper_mrl_derivative(const std::vector<double>& p, const std::vector<double>& mu, double a) {
  double n = 0.0, dn = 0.0, d = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] * std::exp(-mu[i] * a);
    n += e / mu[i];
    dn += -e;
    d += e;
    dd += -mu[i] * e;
  }
  return (dn * d - n * dd) / (d * d);
}

/// phi(b, c) from a tail function via Simpson.
inline double phi(const std::function<double(double)>& tail, double b, double c) {
  const double done = tail(b) - (std::isinf(c) ? 0.0 : tail(c));
  const double work = std::isinf(c) ? simpson_to_inf(tail, b) : simpson(tail, b, c);
  return work / done;
}

/// Gittins rank by scanning phi(a, c) on a dense grid of c, then a golden
/// polish around the best grid point. c = infinity is included.
inline double gittins_rank(const std::function<double(double)>& tail, double a, double c_max, int n = 2000) {
  double best = phi(tail, a, kInf), best_c = kInf;
  const double h = (c_max - a) / n;
  for (int i = 1; i <= n; ++i) {
    const double c = a + h * i;
    const double v = phi(tail, a, c);
    if (v < best) {
      best = v;
      best_c = c;
    }
  }
  if (std::isfinite(best_c)) {
    double lo = std::max(a + 1e-12, best_c - h), hi = std::min(c_max, best_c + h);
    const double g = 0.6180339887498949;
    for (int it = 0; it < 100; ++it) {
      const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      if (phi(tail, a, x1) < phi(tail, a, x2)) hi = x2;
      else lo = x1;
    }
    best = std::min(best, phi(tail, a, 0.5 * (lo + hi)));
  }
  return best;
}

/// Secant iteration from two starting points.
inline double secant(const std::function<double(double)>& f, double x0, double x1, double tol = 1e-12) {
  double f0 = f(x0), f1 = f(x1);
  for (int it = 0; it < 200 && std::abs(x1 - x0) > tol; ++it) {
    const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = f(x1);
  }
  return x1;
}

/// M/G/1 FCFS mean response time (Pollaczek-Khinchine).
inline double pk_mean_response(double lambda, double es, double es2) {
  const double rho = lambda * es;
  return es + lambda * es2 / (2.0 * (1.0 - rho));
}

/// Sample mean and standard error of f(X) with X drawn by inverse transform.
struct MonteCarlo {
  double mean;
  double stderr_;
};
inline MonteCarlo monte_carlo(const std::function<double(double)>& inverse_cdf, const std::function<double(double)>& f,
                              std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
    const double v = f(inverse_cdf(u));
    sum += v;
    sum2 += v * v;
  }
  const double m = sum / n;
  return {m, std::sqrt(std::max(0.0, sum2 / n - m * m) / n)};
}

}  // namespace oracle
