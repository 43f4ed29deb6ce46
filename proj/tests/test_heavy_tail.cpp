#include <doctest.h>

#include <cmath>
#include <vector>

#include "soaptail/errors.hpp"
#include "soaptail/gittins.hpp"
#include "soaptail/heavy_tail.hpp"

using namespace soaptail;

namespace {

constexpr double kInf = INFINITY;

const std::vector<double> kSizes{2, 4, 8, 16, 32, 64, 128, 256};

// r(a) = a, except on the dips in `dips` where the rank is held at `level`.
struct Dip {
  double start, end, level;
};
RankFunction dipped(const std::vector<Dip>& dips, const std::string& label) {
  std::vector<Piece> pieces;
  double at = 0.0;
  for (const Dip& d : dips) {
    pieces.push_back({at, d.start, at, 1.0});
    pieces.push_back({d.start, d.end, d.level, 0.0});
    at = d.end;
  }
  pieces.push_back({at, kInf, at, 1.0});
  return RankFunction(label, pieces, {}, kInf);
}

// Unit-length dips to rank 0 at every power of two: gaps never grow.
RankFunction unit_dips() {
  std::vector<Dip> dips;
  for (double b = 4.0; b < 1e6; b *= 2.0) dips.push_back({b, b + 1.0, 0.0});
  return dipped(dips, "unit dips");
}

// Dips [b, 2b) at b = 4^k with level b^(1/3): gaps grow like b (zeta = 1)
// and a job of size x sees dips out to about x^3.
RankFunction growing_dips() {
  std::vector<Dip> dips;
  for (double b = 4.0; b < 1e9; b *= 4.0) dips.push_back({b, 2.0 * b, std::cbrt(b)});
  return dipped(dips, "growing dips");
}

}  // namespace

TEST_CASE("sufficient condition examples") {
  const auto a = sufficient_condition(0.0, 1.0, kInf, 2.5, 2.5);
  CHECK(a.holds);
  CHECK(a.lhs == 0.0);
  CHECK(a.margin == doctest::Approx(0.6));

  const auto b = sufficient_condition(1.0, 0.0, kInf, 2.5, 2.5);
  CHECK_FALSE(b.holds);
  CHECK(b.lhs == doctest::Approx(1.0));

  const auto c = sufficient_condition(0.0, 0.0, 1.0, 2.0, 2.0);
  CHECK(c.holds);
  CHECK(c.lhs == doctest::Approx(-1.0));
  CHECK(c.rhs == doctest::Approx(0.5));

  CHECK_THROWS_AS(sufficient_condition(0.0, 0.0, 1.0, 1.0, 2.0), DomainError);
  CHECK_THROWS_AS(sufficient_condition(0.0, 0.0, 1.0, 2.0, 1.5), DomainError);
  CHECK_THROWS_AS(sufficient_condition(1.0, 1.0, 1.0, 2.0, 2.0), DomainError);
}

TEST_CASE("property: sufficient condition is monotone on a lattice") {
  const std::vector<double> zs{0.0, 0.25, 0.5, 1.0, 1.5}, ts{0.0, 0.5, 1.0, 1.5}, as{1.2, 1.5, 2.0, 2.5, 3.5};
  const std::vector<double> es{1.0, 2.0, 4.0, kInf};
  for (double z : zs)
    for (double t : ts)
      for (double e : es)
        for (double al : as) {
          if (e < std::max(1.0, z + t)) continue;
          const double beta = 3.5;
          const bool base = sufficient_condition(z, t, e, al, beta).holds;
          for (double z2 : zs)
            if (z2 > z && e >= z2 + t && !base) CHECK_FALSE(sufficient_condition(z2, t, e, al, beta).holds);
          for (double t2 : ts)
            if (t2 > t && e >= z + t2 && !base) CHECK_FALSE(sufficient_condition(z, t2, e, al, beta).holds);
          for (double a2 : as)
            if (a2 > al && base) CHECK(sufficient_condition(z, t, e, a2, beta).holds);
        }
}

TEST_CASE("tail target") {
  const auto d = dist::pareto(2.5, 1.0);
  const auto p = SystemParams::from_rho(d, 0.5);
  CHECK(tail_target(d, p, 4.0) == doctest::Approx(std::pow(2.0, -2.5)).epsilon(1e-14));
  CHECK(tail_target(d, p, 0.0) == 1.0);
  const auto light = SystemParams::from_rho(d, 1e-9);
  CHECK(tail_target(d, light, 7.0) == doctest::Approx(d.tail(7.0)).epsilon(1e-8));

  double prev = 1.0;
  for (double t = 0.0; t < 1e4; t = t * 1.5 + 0.1) {
    const double v = tail_target(d, p, t);
    CHECK(v <= prev);
    prev = v;
  }
  for (double t : {1.0, 3.0, 30.0}) {
    double last = 0.0;
    for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double v = tail_target(d, SystemParams::from_rho(d, rho), t);
      CHECK(v >= last);
      last = v;
    }
  }
}

TEST_CASE("exponent fits") {
  const auto par = dist::pareto(2.5, 1.0);
  SUBCASE("FB is vacuous") {
    const auto f = fit_exponents(make_policy(PolicyKind::Fb), par, kSizes, 1e5);
    CHECK(f.vacuous);
    CHECK(f.zeta == 0.0);
    CHECK(f.theta == 0.0);
    CHECK(f.eta == 1.0);
    REQUIRE(f.sufficient.has_value());
    CHECK(f.sufficient->holds);
  }
  SUBCASE("constant-length gaps give zero exponents") {
    const auto f = fit_exponents(unit_dips(), par, kSizes, 1e5);
    CHECK_FALSE(f.vacuous);
    CHECK(std::abs(f.zeta) <= 0.05);
    CHECK(std::abs(f.theta) <= 0.05);
    CHECK(f.sufficient->holds);
  }
  SUBCASE("gaps proportional to b fail the condition") {
    const auto f = fit_exponents(growing_dips(), par, kSizes, 1e10);
    CHECK(f.zeta == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(f.theta) <= 0.05);
    CHECK(f.eta > 2.5);
    REQUIRE(f.sufficient.has_value());
    CHECK_FALSE(f.sufficient->holds);
  }
  SUBCASE("too few sizes with intervals") {
    const auto lone = dipped({{300.0, 301.0, 100.0}}, "lone dip");
    CHECK_THROWS_AS(fit_exponents(lone, par, kSizes, 1e5), InsufficientData);
  }
  SUBCASE("alpha and beta only for nicely heavy tails") {
    const auto f = fit_exponents(make_policy(PolicyKind::Fb), dist::exponential(1.0), kSizes, 1e5);
    CHECK_FALSE(f.sufficient.has_value());
  }
}

TEST_CASE("property: Gittins intervals past x on heavy tails stay O(x)") {
  for (const auto& d : {dist::pareto(2.5, 1.0), dist::pareto(1.8, 2.0)}) {
    CAPTURE(d.describe());
    const auto r = build_gittins(d);
    const auto f = fit_exponents(r, d, kSizes, 1e5);
    // Fitted once on these members: no ratio exceeds 4.
    const double C = 4.0;
    for (const auto& iv : f.intervals) CHECK((iv.c - iv.b) / iv.x <= C);
    for (const auto& row : f.rows) CHECK(row.max_gap_ratio <= C);
  }
}

TEST_CASE("diagnostic curves") {
  const auto d = dist::pareto(2.5, 1.0);
  const auto p = SystemParams::from_rho(d, 0.5);

  SUBCASE("Gittins sum ratio falls with x") {
    const auto rows = diagnostic_curves(build_gittins(d), d, p, kSizes, {1.0}, 1e5);
    REQUIRE(rows.size() == kSizes.size());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].sum_ratio < rows[i - 1].sum_ratio);
    for (const auto& r : rows) CHECK(r.integral_ratio <= 1.0 + 1e-9);
  }
  SUBCASE("FB keeps only the first segment") {
    const auto rows = diagnostic_curves(make_policy(PolicyKind::Fb), d, p, kSizes, {1.0, 2.0}, 1e5);
    for (const auto& r : rows) {
      CHECK(r.n_intervals == 1);
      CHECK(r.segment_sum == doctest::Approx(segment_moment(d, 0.0, r.x, r.p)).epsilon(1e-9));
      CHECK(r.integral_ratio <= 1.0 + 1e-9);
    }
  }
  SUBCASE("FCFS integral from the definition") {
    // Under a constant rank every age sits at the top of the hill, so the
    // level w- excludes all service: X_0[w-] = 0 and the integrand is 1.
    const auto rows = diagnostic_curves(make_policy(PolicyKind::Fcfs), d, p, kSizes, {1.0}, 1e5);
    for (const auto& r : rows) {
      CHECK(r.integral == doctest::Approx(r.x).epsilon(1e-7));
      CHECK(r.integral_ratio == doctest::Approx(1.0 - p.rho).epsilon(1e-7));
    }
  }
}
