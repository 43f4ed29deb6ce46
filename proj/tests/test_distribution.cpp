#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "soaptail/distribution.hpp"
#include "soaptail/errors.hpp"

using namespace soaptail;

namespace {

std::vector<JobSizeDistribution> catalog() {
  return {dist::exponential(1.0),
          dist::hyperexponential({0.5, 0.5}, {2.0, 0.5}),
          dist::uniform(1.0),
          dist::deterministic(2.0),
          dist::erlang(2, 2.0),
          dist::pareto(2.5, 1.0),
          dist::bounded_pareto(1.5, 1.0, 100.0),
          dist::weibull(0.5, 1.0),
          dist::weibull(2.0, 1.0)};
}

}  // namespace

TEST_CASE("family examples") {
  const auto e = dist::exponential(1.0);
  CHECK(e.mean() == 1.0);
  CHECK(e.tail(0.7) == doctest::Approx(std::exp(-0.7)).epsilon(1e-15));
  CHECK(e.is_light());

  const auto p = dist::pareto(2.5, 1.0);
  CHECK(p.is_heavy());
  CHECK(p.tail_class().alpha == 2.5);
  CHECK(p.tail_class().beta == 2.5);

  CHECK(dist::hyperexponential({0.5, 0.5}, {2.0, 0.5}).mean() == doctest::Approx(1.25));
}

TEST_CASE("invalid parameters name the field") {
  auto field_of = [](auto make) {
    try {
      make();
    } catch (const InvalidParameter& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of([] { dist::exponential(-1.0); }) == "mu");
  CHECK(field_of([] { dist::hyperexponential({0.5, 0.6}, {1.0, 2.0}); }) == "p");
  CHECK(field_of([] { dist::pareto(1.0, 1.0); }) == "alpha");
  CHECK(field_of([] { make_distribution({"lognormal", {}}); }) == "family");
  CHECK(field_of([] { make_distribution({"erlang", {{"k", {2.5}}, {"mu", {1.0}}}}); }) == "k");
}

TEST_CASE("make_distribution builds from named parameters") {
  const auto h = make_distribution({"hyperexponential", {{"p", {0.5, 0.5}}, {"mu", {2.0, 0.5}}}});
  CHECK(h.mean() == doctest::Approx(1.25));
  CHECK(make_distribution({"exponential", {{"mu", {2.0}}}}).mean() == doctest::Approx(0.5));
}

TEST_CASE("system parameters") {
  const auto e = dist::exponential(1.0);
  CHECK(SystemParams::from_lambda(e, 0.5).rho == doctest::Approx(0.5));
  CHECK(SystemParams::from_rho(dist::deterministic(2.0), 0.5).lambda == doctest::Approx(0.25));
  CHECK_THROWS_AS(SystemParams::from_rho(e, 1.0), UnstableConfig);
  CHECK_THROWS_AS(SystemParams::from_lambda(e, 1.5), UnstableConfig);
}

TEST_CASE("mean residual life") {
  CHECK(mean_residual_life(dist::exponential(2.0), 5.0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(mean_residual_life(dist::uniform(1.0), 0.5) == doctest::Approx(0.25).epsilon(1e-8));
  const std::vector<double> p{0.5, 0.5}, mu{2.0, 0.5};
  CHECK(mean_residual_life(dist::hyperexponential(p, mu), 3.0) ==
        doctest::Approx(oracle::hyper_mrl(p, mu, 3.0)).epsilon(1e-8));
  CHECK_THROWS_AS(mean_residual_life(dist::uniform(1.0), 1.0), PastSupport);
}

TEST_CASE("NBUE classification") {
  CHECK(classify_nbue(dist::exponential(1.0)).cls == NbueClass::Nbue);
  CHECK(classify_nbue(dist::uniform(1.0)).cls == NbueClass::Nbue);

  const std::vector<double> p{0.5, 0.5}, mu{2.0, 0.5};
  // m'(a) > 0 everywhere, so m rises past m(0) right away.
  for (double a = 0.0; a < 20.0; a += 0.25) REQUIRE(oracle::hyper_mrl_derivative(p, mu, a) > 0.0);
  CHECK(classify_nbue(dist::hyperexponential(p, mu)).cls == NbueClass::NotEnbue);
}

TEST_CASE("transform evaluation") {
  const auto e = dist::exponential(1.0);
  CHECK(lst_eval(e, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(is_divergent(lst_eval(e, -1.0)));
  CHECK(lst_eval(dist::deterministic(2.0), -0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(is_divergent(lst_eval(dist::pareto(2.5, 1.0), -1e-6)));
}

TEST_CASE("truncation") {
  const auto e = dist::exponential(1.0);
  const auto same = truncate(e, INFINITY);
  CHECK(same.family() == e.family());

  const auto d1 = truncate(dist::deterministic(2.0), 1.0);
  CHECK(d1.mean() == doctest::Approx(1.0));
  CHECK(d1.lst(0.7) == doctest::Approx(std::exp(-0.7)));
  CHECK(d1.tail(0.999) == 1.0);
  CHECK(d1.tail(1.0) == 0.0);

  const auto e1 = truncate(e, 1.0);
  CHECK(e1.mean() == doctest::Approx(oracle::simpson(oracle::exp_tail(1.0), 0.0, 1.0)).epsilon(1e-10));
  CHECK(e1.mean() == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("property: tail integrates to the mean and the transform is 1 at 0") {
  for (const auto& d : catalog()) {
    CAPTURE(d.describe());
    CHECK(integrated_tail(d, 0.0, INFINITY) == doctest::Approx(d.mean()).epsilon(1e-6));
    CHECK(lst_eval(d, 0.0) == 1.0);
  }
}

TEST_CASE("property: quadrature residual life matches closed forms") {
  std::mt19937_64 gen(11);
  for (const auto& d : catalog()) {
    CAPTURE(d.describe());
    const double hi = std::isfinite(d.x_max()) ? d.x_max() : 20.0 * d.mean();
    std::uniform_real_distribution<double> age(0.0, hi);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
      const double a = age(gen);
      if (d.tail(a) <= 1e-12) continue;
      const auto closed = d.residual_life_closed_form(a);
      REQUIRE(closed.has_value());
      const double m = mean_residual_life(d, a);
      CAPTURE(a);
      CHECK(std::abs(m - *closed) <= 1e-6 * std::abs(*closed));
      ++checked;
    }
    CHECK(checked > 0);
  }
}

// About a hundred 3-SE comparisons run here, so a couple of misses are
// expected by chance; a real sampler bug shows up as many or as a large one.
TEST_CASE("property: sampler mean and tail within 3 standard errors") {
  int misses = 0;
  for (const auto& d : catalog()) {
    CAPTURE(d.describe());
    RandomStream rng(2024, 0, StreamRole::Test);
    const std::size_t n = 1'000'000;
    std::vector<double> xs(n);
    double sum = 0.0, sum2 = 0.0;
    for (auto& x : xs) {
      x = d.sample(rng);
      sum += x;
      sum2 += x * x;
    }
    const double m = sum / n;
    const double sd = std::sqrt(std::max(0.0, sum2 / n - m * m));
    // The Pareto(2.5) variance is finite, so the standard error is meaningful.
    const double z_mean = sd > 0 ? std::abs(m - d.mean()) / (sd / std::sqrt(double(n))) : std::abs(m - d.mean()) * 1e12;
    misses += z_mean > 3.0;
    CHECK(z_mean <= 4.5);

    std::sort(xs.begin(), xs.end());
    const double hi = std::isfinite(d.x_max()) ? d.x_max() : 5.0 * d.mean();
    for (int k = 1; k <= 10; ++k) {
      const double t = hi * k / 11.0;
      const double p = d.tail(t);
      const double emp = double(xs.end() - std::upper_bound(xs.begin(), xs.end(), t)) / n;
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
      CAPTURE(t);
      misses += std::abs(emp - p) > 3.0 * se + 1e-12;
      CHECK(std::abs(emp - p) <= 4.5 * se + 1e-12);
    }
  }
  CHECK(misses <= 2);
}

TEST_CASE("property: truncated mean equals the integrated tail") {
  for (const auto& d : catalog()) {
    CAPTURE(d.describe());
    for (double a : {0.3, 1.0, 1.7, 4.0}) {
      if (a >= d.x_max()) continue;
      const double target = oracle::simpson([&](double t) { return d.tail(t); }, 0.0, a, 1e-13);
      CAPTURE(a);
      CHECK(std::abs(truncate(d, a).mean() - target) <= 1e-8);
    }
  }
}

TEST_CASE("age grid contains breakpoints and is increasing") {
  const auto d = dist::deterministic(2.0);
  const auto grid = make_age_grid(d, {});
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(std::find(grid.begin(), grid.end(), 2.0) != grid.end());
  CHECK(grid.front() == 0.0);
}
