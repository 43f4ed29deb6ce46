#include "soaptail/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace soaptail {
namespace {

using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;

struct Panel {
  double lo, hi, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel evaluate(const std::function<double(double)>& f, double lo, double hi) {
  double err = 0.0;
  const double v = Rule::integrate(f, lo, hi, 0, 0.0, &err);
  return {lo, hi, v, err};
}

double integrate_finite(const std::function<double(double)>& f, double a, double b,
                        const QuadOptions& opts) {
  if (!(b > a)) return 0.0;
  std::priority_queue<Panel> heap;
  Panel first = evaluate(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  int panels = 1;
  while (total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total)) &&
         panels < opts.max_intervals) {
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) break;  // panel at machine resolution
    heap.pop();
    Panel left = evaluate(f, worst.lo, mid);
    Panel right = evaluate(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of the running updates.
  double sum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    heap.pop();
  }
  return sum;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opts) {
  if (!(b > a)) return 0.0;
  if (std::isinf(b)) {
    auto g = [&](double u) {
      const double one_minus = 1.0 - u;
      const double t = a + u / one_minus;
      const double v = f(t);
      return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
    };
    return integrate_finite(g, 0.0, 1.0, opts);
  }
  return integrate_finite(f, a, b, opts);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints, const QuadOptions& opts) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(b);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) sum += integrate(f, cuts[i], cuts[i + 1], opts);
  return sum;
}

}  // namespace soaptail
