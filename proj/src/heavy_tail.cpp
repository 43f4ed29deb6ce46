#include "soaptail/heavy_tail.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "soaptail/errors.hpp"
#include "soaptail/gittins.hpp"
#include "soaptail/quadrature.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pos(double v) { return v > 0.0 ? v : 0.0; }

struct LinearFit {
  std::vector<double> coef;  // intercept first
  RegressionStats stats;
  bool ok = false;
};

// Ordinary least squares of y on [1, columns...] via normal equations with
// partial pivoting; ok = false when the design is (numerically) singular.
LinearFit least_squares(const std::vector<std::vector<double>>& cols, const std::vector<double>& y) {
  const std::size_t k = cols.size() + 1, n = y.size();
  LinearFit out;
  out.stats.n = n;
  if (n < k) return out;
  auto x = [&](std::size_t row, std::size_t j) { return j == 0 ? 1.0 : cols[j - 1][row]; };
  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) a[r][c] += x(i, r) * x(i, c);
      a[r][k] += x(i, r) * y[i];
    }
  double scale = 0.0;
  for (std::size_t r = 0; r < k; ++r) scale = std::max(scale, std::abs(a[r][r]));
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) <= 1e-10 * scale) return out;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
    }
  }
  out.coef.resize(k);
  for (std::size_t r = 0; r < k; ++r) out.coef[r] = a[r][k] / a[r][r];
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double rss = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < k; ++j) pred += out.coef[j] * x(i, j);
    rss += (y[i] - pred) * (y[i] - pred);
    tss += (y[i] - mean) * (y[i] - mean);
  }
  out.stats.rss = rss;
  out.stats.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  out.ok = true;
  return out;
}

}  // namespace

SufficientResult sufficient_condition(double zeta, double theta, double eta, double alpha, double beta) {
  if (!(alpha > 1.0)) throw DomainError("alpha must exceed 1");
  if (!(beta >= alpha)) throw DomainError("beta must be at least alpha");
  if (!(zeta >= 0.0) || !(theta >= 0.0)) throw DomainError("zeta and theta must be non-negative");
  if (!(eta >= std::max(1.0, zeta + theta) - 1e-12)) throw DomainError("eta must be at least max(1, zeta + theta)");
  const double lhs = zeta + pos(theta - 1.0) - (std::isinf(eta) ? 0.0 : pos(1.0 - theta) / eta);
  const double rhs = (alpha - 1.0) / beta;
  return {lhs < rhs, lhs, rhs, rhs - lhs};
}

HeavyTailFit fit_exponents(const RankFunction& r, const JobSizeDistribution& d, const std::vector<double>& x_grid,
                           double horizon) {
  HeavyTailFit fit;
  std::vector<double> log_b, log_x, log_gap, eta_x, eta_c;
  std::size_t x_with_intervals = 0;
  for (double x : x_grid) {
    if (!(x > 0.0)) throw InvalidParameter("x_grid", "sizes must be positive");
    FitRow row{x, r.sup_over(0.0, x), 0, 0.0, std::nullopt};
    for (const WInterval& iv : w_intervals(r, row.w_x, horizon).intervals) {
      if (iv.b < x || !(iv.c > iv.b)) continue;
      ++row.n_intervals;
      row.max_gap_ratio = std::max(row.max_gap_ratio, (iv.c - iv.b) / x);
      fit.intervals.push_back({x, iv.b, iv.c, iv.open});
      log_b.push_back(std::log(iv.b));
      log_x.push_back(std::log(x));
      log_gap.push_back(std::log(iv.c - iv.b));
      if (!iv.open) row.max_closed_c = std::max(row.max_closed_c.value_or(0.0), iv.c);
    }
    if (row.n_intervals) ++x_with_intervals;
    if (row.max_closed_c) {
      eta_x.push_back(std::log(x));
      eta_c.push_back(std::log(*row.max_closed_c));
    }
    fit.rows.push_back(row);
  }

  if (x_with_intervals == 0) {
    fit.vacuous = true;
    fit.zeta = fit.theta = 0.0;
    fit.eta = 1.0;
  } else {
    if (x_with_intervals < 3)
      throw InsufficientData("only " + std::to_string(x_with_intervals) +
                             " grid sizes have a w_x-interval past x; need at least 3");
    LinearFit zt = least_squares({log_b, log_x}, log_gap);
    if (zt.ok) {
      fit.zeta = zt.coef[1];
      fit.theta = zt.coef[2];
      fit.zeta_theta_fit = zt.stats;
    } else {
      // Only zeta + theta is identified; report it all as theta.
      fit.collinear = true;
      LinearFit t = least_squares({log_x}, log_gap);
      fit.zeta = 0.0;
      fit.theta = t.ok ? t.coef[1] : 0.0;
      fit.zeta_theta_fit = t.stats;
    }
    LinearFit e = least_squares({eta_x}, eta_c);
    fit.eta = e.ok ? e.coef[1] : kInf;
    fit.eta_fit = e.stats;
  }

  fit.zeta += 0.0;  // no -0 in reports
  fit.theta += 0.0;
  fit.zeta_eval = pos(fit.zeta);
  fit.theta_eval = pos(fit.theta);
  fit.eta_eval = std::max({fit.eta, 1.0, fit.zeta_eval + fit.theta_eval});
  const TailClass tc = d.tail_class();
  if (tc.kind == TailKind::NicelyHeavy) {
    fit.alpha = tc.alpha;
    fit.beta = tc.beta;
    fit.sufficient = sufficient_condition(fit.zeta_eval, fit.theta_eval, fit.eta_eval, tc.alpha, tc.beta);
  }
  return fit;
}

double tail_target(const JobSizeDistribution& d, const SystemParams& p, double t) {
  if (!(t >= 0.0)) throw DomainError("t must be non-negative");
  return d.tail((1.0 - p.rho) * t);
}

std::vector<DiagnosticRow> diagnostic_curves(const RankFunction& r, const JobSizeDistribution& d,
                                             const SystemParams& p, const std::vector<double>& x_grid,
                                             const std::vector<double>& p_list, double horizon) {
  std::vector<DiagnosticRow> rows;
  std::map<double, double> truncated_mean;  // c -> E[min{X, c}]
  auto mean_up_to = [&](double c) {
    if (c >= d.x_max()) return d.mean();
    auto it = truncated_mean.find(c);
    if (it != truncated_mean.end()) return it->second;
    const double v = integrated_tail(d, 0.0, c);
    truncated_mean.emplace(c, v);
    return v;
  };

  for (double x : x_grid) {
    if (!(x > 0.0)) throw InvalidParameter("x_grid", "sizes must be positive");
    const double wx = r.sup_over(0.0, x);
    const WIntervalSet set = w_intervals(r, wx, horizon);

    // w_x(a) only changes at piece boundaries below x; integrate piecewise.
    std::vector<double> cuts;
    for (const Piece& pc : r.pieces())
      if (pc.start > 0.0 && pc.start < x) cuts.push_back(pc.start);
    for (const Spike& s : r.spikes())
      if (s.age > 0.0 && s.age < x) cuts.push_back(s.age);
    auto integrand = [&](double a) {
      const double w = worst_future_rank(r, x, a);
      const double c0 = w_intervals(r, left_limit_level(w)).intervals.front().c;
      return 1.0 / (1.0 - p.lambda * mean_up_to(c0));
    };
    const double integral = integrate(integrand, 0.0, x, cuts, QuadOptions{1e-9, 1e-7, 20000});

    for (double pw : p_list) {
      DiagnosticRow row{x, pw, 0, 0.0, 0.0, integral, integral * (1.0 - p.rho) / x};
      for (const WInterval& iv : set.intervals) {
        if (!(iv.c > iv.b)) continue;
        ++row.n_intervals;
        row.segment_sum += segment_moment(d, iv.b, iv.c, pw);
      }
      row.sum_ratio = row.segment_sum / std::pow(x, pw);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace soaptail
