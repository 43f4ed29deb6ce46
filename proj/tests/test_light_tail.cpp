#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "soaptail/errors.hpp"
#include "soaptail/light_tail.hpp"

using namespace soaptail;

namespace {

std::vector<JobSizeDistribution> light_catalog() {
  return {dist::exponential(1.0), dist::deterministic(1.0), dist::erlang(2, 2.0),
          dist::hyperexponential({0.5, 0.5}, {2.0, 0.5}), dist::uniform(2.0)};
}

}  // namespace

TEST_CASE("sigma inverse examples") {
  const auto e = dist::exponential(1.0);
  const auto p = SystemParams::from_lambda(e, 0.5);
  CHECK(sigma_inv(e, p, 0.0) == 0.0);
  CHECK(sigma_inv(e, p, -0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::isinf(sigma_inv(e, p, -1.0)));

  const auto d = dist::deterministic(1.0);
  const auto pd = SystemParams::from_lambda(d, 0.5);
  CHECK(sigma_inv(d, pd, -1.0) == doctest::Approx(-1.0 - 0.5 * (1.0 - std::exp(1.0))).epsilon(1e-14));
  CHECK(sigma_inv(d, pd, -1.0) == doctest::Approx(-0.1409).epsilon(1e-3));
}

TEST_CASE("gamma of the work transform") {
  const auto e1 = dist::exponential(1.0);
  CHECK(gamma_W(e1, SystemParams::from_lambda(e1, 0.5)).value == doctest::Approx(-0.5).epsilon(1e-10));
  const auto e2 = dist::exponential(2.0);
  CHECK(gamma_W(e2, SystemParams::from_lambda(e2, 1.0)).value == doctest::Approx(-1.0).epsilon(1e-10));

  const auto d = dist::deterministic(1.0);
  const auto g = gamma_W(d, SystemParams::from_lambda(d, 0.5));
  const double ref = oracle::secant([](double s) { return s - 0.5 * (1.0 - std::exp(-s)); }, -2.0, -1.5);
  CHECK(ref < 0.0);
  CHECK(std::abs(g.value - ref) <= 1e-9);
  CHECK(g.bracket.lo <= g.value);
  CHECK(g.value <= g.bracket.hi);
}

TEST_CASE("minimum of sigma inverse") {
  const auto e = dist::exponential(1.0);
  const auto gs = gamma_sigma(e, SystemParams::from_lambda(e, 0.5));
  CHECK(gs.sigma_at_gamma == doctest::Approx(-1.0 + std::sqrt(0.5)).epsilon(1e-7));
  CHECK(gs.gamma_sigma == doctest::Approx(-std::pow(1.0 - std::sqrt(0.5), 2)).epsilon(1e-9));
  CHECK(gs.gamma_sigma > gamma_W(e, SystemParams::from_lambda(e, 0.5)).value);

  // Light-load trend toward -mu.
  double prev = 0.0;
  for (double lambda : {0.5, 0.1, 0.01, 0.001}) {
    const double v = gamma_sigma(e, SystemParams::from_lambda(e, lambda)).gamma_sigma;
    CHECK(v < prev);
    CHECK(v == doctest::Approx(-std::pow(1.0 - std::sqrt(lambda), 2)).epsilon(1e-7));
    prev = v;
  }
  CHECK(prev > -1.0);
}

TEST_CASE("M/M/1 decay rates") {
  const auto e = dist::exponential(1.0);
  const auto p = SystemParams::from_lambda(e, 0.5);
  const auto rep = decay_rates(e, p);
  CHECK(rep.d_fcfs == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::abs(rep.d_fb - std::pow(1.0 - std::sqrt(0.5), 2)) <= 1e-8);
  CHECK_FALSE(rep.d_policy.has_value());

  const auto with_step = decay_rates(e, p, 1.0);
  REQUIRE(with_step.d_policy.has_value());
  CHECK(with_step.d_fb < *with_step.d_policy);
  CHECK(*with_step.d_policy < with_step.d_fcfs);

  double prev = 0.0;
  for (double lambda : {0.5, 0.1, 0.01, 0.001}) {
    const double v = decay_rates(e, SystemParams::from_lambda(e, lambda)).d_fcfs;
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("heavy tails are rejected") {
  const auto par = dist::pareto(2.5, 1.0);
  CHECK_THROWS_AS(decay_rates(par, SystemParams::from_rho(par, 0.5)), ClassMismatch);
}

TEST_CASE("SOAP classification by worst age") {
  CHECK(classify_soap(0.0, INFINITY) == Verdict::LogTailOptimal);
  CHECK(classify_soap(INFINITY, INFINITY) == Verdict::LogTailPessimal);
  CHECK(classify_soap(5.0, 5.0) == Verdict::LogTailPessimal);
  CHECK(classify_soap(1.0, INFINITY) == Verdict::LogTailIntermediate);
}

TEST_CASE("Gittins classification") {
  const auto e = classify_gittins(dist::exponential(1.0));
  CHECK(e.verdict == Verdict::LogTailOptimal);
  CHECK(e.agrees());
  const auto u = classify_gittins(dist::uniform(1.0));
  CHECK(u.verdict == Verdict::LogTailOptimal);
  CHECK(u.agrees());
  const auto h = classify_gittins(dist::hyperexponential({0.5, 0.5}, {2.0, 0.5}));
  CHECK(h.verdict == Verdict::LogTailPessimal);
  CHECK(h.agrees());
}

TEST_CASE("property: gamma chain and poles ordering") {
  for (const auto& d : light_catalog()) {
    for (double rho : {0.3, 0.5, 0.7, 0.9}) {
      CAPTURE(d.describe());
      CAPTURE(rho);
      const auto p = SystemParams::from_rho(d, rho);
      const auto rep = decay_rates(d, p);
      CHECK(rep.gamma_X + 1e-9 < rep.gamma_W.value);
      CHECK(rep.gamma_W.value + 1e-9 < rep.sigma.sigma_at_gamma);
      CHECK(rep.sigma.sigma_at_gamma + 1e-9 < rep.sigma.gamma_sigma);
      for (double a : {0.5, 1.0, 2.0}) {
        if (a >= d.x_max()) continue;
        const auto r = decay_rates(d, p, a);
        CAPTURE(a);
        CHECK(r.d_fb + 1e-9 < *r.d_policy);
        CHECK(*r.d_policy + 1e-9 < r.d_fcfs);
      }
    }
  }
}

TEST_CASE("property: truncation pushes sigma and its inverse toward the identity") {
  std::mt19937_64 gen(31);
  for (const auto& d : light_catalog()) {
    const auto p = SystemParams::from_rho(d, 0.6);
    for (double a : {0.5, 1.0}) {
      if (a >= d.x_max()) continue;
      const auto t = truncate(d, a);
      const double lo_sigma = gamma_sigma(d, p).gamma_sigma;
      const double lo_inv = std::max(d.lst_abscissa(), gamma_W(d, p).value * 4.0);
      std::uniform_real_distribution<double> us(lo_sigma, 0.0), ui(lo_inv, 0.0);
      for (int i = 0; i < 100; ++i) {
        CAPTURE(d.describe());
        CAPTURE(a);
        const double s = us(gen);
        if (s >= -1e-9) continue;
        const double full = sigma(d, p, s), trunc = sigma(t, p, s);
        CAPTURE(s);
        CHECK(full < trunc);
        CHECK(trunc < s);

        const double v = ui(gen);
        if (v >= -1e-9 || v <= d.lst_abscissa()) continue;
        CAPTURE(v);
        CHECK(sigma_inv(d, p, v) > sigma_inv(t, p, v));
        CHECK(sigma_inv(t, p, v) > v);
      }
    }
  }
}

TEST_CASE("property: sigma inverts sigma inverse on its branch") {
  std::mt19937_64 gen(37);
  for (const auto& d : light_catalog()) {
    const auto p = SystemParams::from_rho(d, 0.7);
    const double lo = gamma_sigma(d, p).gamma_sigma;
    std::uniform_real_distribution<double> us(lo, 0.0);
    for (int i = 0; i < 100; ++i) {
      const double s = us(gen);
      CAPTURE(d.describe());
      CAPTURE(s);
      CHECK(std::abs(sigma_inv(d, p, sigma(d, p, s)) - s) <= 1e-8);
    }
  }
}

TEST_CASE("property: the work transform has a first-order pole") {
  for (const auto& d : light_catalog()) {
    for (double rho : {0.3, 0.7}) {
      CAPTURE(d.describe());
      const auto g = gamma_W(d, SystemParams::from_rho(d, rho));
      CHECK(g.pole.first_order);
      CHECK(g.pole.drift < 0.02);
      CHECK(std::abs(g.pole.product[2]) > 0.0);
    }
  }
}
