#include "soaptail/gittins.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "soaptail/errors.hpp"
#include "soaptail/format.hpp"
#include "soaptail/quadrature.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const QuadOptions kFine{1e-16, 1e-12, 2000};
constexpr double kInvPhi = 0.6180339887498949;

// Golden-section minimisation of f on [lo, hi]; returns the best value seen.
double golden_min(const std::function<double(double)>& f, double lo, double hi, double xtol) {
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  double best = std::min(f1, f2);
  for (int it = 0; it < 200 && hi - lo > xtol; ++it) {
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
    best = std::min({best, f1, f2});
  }
  return best;
}

double tail_integral(const JobSizeDistribution& d, double a, double b) {
  b = std::min(b, d.x_max());
  if (!(b > a)) return 0.0;
  const auto cuts = d.breakpoints();
  return integrate([&](double t) { return d.tail(t); }, a, b, cuts, kFine);
}

// int_a^xmax tail, preferring the closed-form residual life.
double tail_integral_to_end(const JobSizeDistribution& d, double a) {
  if (a >= d.x_max()) return 0.0;
  const double ta = d.tail(a);
  if (ta > 0.0)
    if (auto m = d.residual_life_closed_form(a)) return *m * ta;
  return tail_integral(d, a, d.x_max());
}

void require_in_support(const JobSizeDistribution& d, double a) {
  if (a < 0.0) throw DomainError("age must be non-negative");
  if (a >= d.x_max() || !(d.tail(a) > 0.0)) throw PastSupport(a);
}

}  // namespace

double phi(const JobSizeDistribution& d, double b, double c) {
  if (!(b < c)) throw DomainError("phi needs b < c");
  const double den = d.tail(b) - (c >= d.x_max() ? 0.0 : d.tail(c));
  if (!(den > 0.0)) return kInf;
  const double num = std::isinf(c) || c >= d.x_max() ? tail_integral_to_end(d, b) : tail_integral(d, b, c);
  return num / den;
}

GittinsSolver::GittinsSolver(JobSizeDistribution d, const AgeGridSpec& grid) : d_(std::move(d)) {
  knots_ = make_age_grid(d_, grid);
  tail_.resize(knots_.size());
  right_.resize(knots_.size());
  for (std::size_t i = 0; i < knots_.size(); ++i) tail_[i] = d_.tail(knots_[i]);
  right_.back() = tail_integral_to_end(d_, knots_.back());
  for (std::size_t i = knots_.size() - 1; i-- > 0;)
    right_[i] = right_[i + 1] +
                integrate([this](double t) { return d_.tail(t); }, knots_[i], knots_[i + 1], kFine);
}

double GittinsSolver::tail_integral_from(double t) const {
  if (t >= d_.x_max()) return 0.0;
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.end()) return tail_integral_to_end(d_, t);
  const auto j = static_cast<std::size_t>(it - knots_.begin());
  return right_[j] + integrate([this](double s) { return d_.tail(s); }, t, knots_[j], kFine);
}

double GittinsSolver::rank(double a, double tol) const {
  require_in_support(d_, a);
  const double fa = d_.tail(a);
  const double ra = tail_integral_from(a);
  double best = ra / fa;  // c = infinity (or x_max)
  if (auto m = d_.residual_life_closed_form(a)) best = *m;
  enum class Where { End, Edge, Knot } where = Where::End;
  std::size_t best_j = 0;
  const double h = d_.hazard(a);
  if (h > 0.0 && std::isfinite(h) && 1.0 / h < best) {
    best = 1.0 / h;
    where = Where::Edge;
  }
  const auto first = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), a) - knots_.begin());
  for (std::size_t j = first; j < knots_.size(); ++j) {
    const double den = fa - tail_[j];
    if (!(den > 0.0)) continue;
    const double v = (ra - right_[j]) / den;
    if (v < best) {
      best = v;
      best_j = j;
      where = Where::Knot;
    }
  }
  if (where == Where::End) return best;

  double lo, hi;
  if (where == Where::Edge) {
    if (first >= knots_.size()) return best;
    lo = a;
    hi = knots_[first];
  } else {
    lo = best_j > first ? knots_[best_j - 1] : a;
    hi = best_j + 1 < knots_.size() ? knots_[best_j + 1] : knots_[best_j];
  }
  const auto cuts = d_.breakpoints();
  auto objective = [&](double c) {
    if (!(c > a)) return kInf;
    const double den = fa - d_.tail(c);
    if (!(den > 0.0)) return kInf;
    return integrate([this](double t) { return d_.tail(t); }, a, c, cuts, kFine) / den;
  };
  const double xtol = std::max(std::sqrt(tol) * 0.1 * std::max(1.0, hi), 4e-16 * hi);
  return std::min(best, golden_min(objective, lo, hi, xtol));
}

double gittins_rank(const JobSizeDistribution& d, double a, double tol) {
  require_in_support(d, a);
  const GittinsSolver solver(d, AgeGridSpec{1024, std::nullopt});
  return solver.rank(a, tol);
}

namespace {

struct Node {
  double age;
  double left;   // left limit of r at age
  double right;  // r(age)
};

void refine(const GittinsSolver& s, const GittinsBuildOptions& opts, const Node& a, const Node& b, int depth,
            std::vector<Node>& out) {
  if (depth >= opts.max_depth) return;
  const double mid = 0.5 * (a.age + b.age);
  if (!(mid > a.age && mid < b.age)) return;
  const double v = s.rank(mid);
  const double interp = 0.5 * (a.right + b.left);
  const Node m{mid, v, v};
  if (std::abs(v - interp) <= opts.refine_tol * std::abs(v) + 1e-12) return;
  refine(s, opts, a, m, depth + 1, out);
  out.push_back(m);
  refine(s, opts, m, b, depth + 1, out);
}

// Greedy merge of consecutive continuous pieces that stay collinear within
// 1e-9 relative; nearly flat runs become exactly flat.
std::vector<Piece> merge_pieces(const std::vector<Node>& nodes, double end) {
  std::vector<Piece> out;
  std::size_t i = 0;
  const std::size_t n = nodes.size();
  auto close_enough = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)); };
  while (i + 1 < n) {
    std::size_t j = i + 1;
    // Try extending the run [i, j] to j + 1.
    while (j + 1 < n && nodes[j].left == nodes[j].right) {
      const double a0 = nodes[i].age, a1 = nodes[j + 1].age;
      const double v0 = nodes[i].right, v1 = nodes[j + 1].left;
      bool ok = true;
      for (std::size_t k = i + 1; k <= j && ok; ++k) {
        const double lin = v0 + (v1 - v0) * (nodes[k].age - a0) / (a1 - a0);
        ok = close_enough(nodes[k].right, lin);
      }
      if (!ok) break;
      ++j;
    }
    const double a0 = nodes[i].age, a1 = nodes[j].age;
    double v0 = nodes[i].right, v1 = nodes[j].left;
    if (close_enough(v0, v1) && j > i + 1) {
      double sum = 0.0;
      for (std::size_t k = i; k <= j; ++k) sum += k == j ? nodes[k].left : nodes[k].right;
      v0 = v1 = sum / static_cast<double>(j - i + 1);
    }
    out.push_back({a0, a1, v0, v1 == v0 ? 0.0 : (v1 - v0) / (a1 - a0)});
    i = j;
  }
  if (std::isinf(end)) {
    const double v = nodes.back().right;
    if (!out.empty() && out.back().slope == 0.0 && close_enough(out.back().v0, v))
      out.back().end = end;
    else
      out.push_back({nodes.back().age, end, v, 0.0});
  }
  return out;
}

}  // namespace

RankFunction build_gittins(const JobSizeDistribution& d, const GittinsBuildOptions& opts) {
  const GittinsSolver solver(d, opts.grid);
  const double x_max = d.x_max();
  std::vector<double> cuts = d.breakpoints();
  auto is_cut = [&](double a) {
    return std::any_of(cuts.begin(), cuts.end(), [&](double c) { return c == a; });
  };

  std::vector<Node> coarse;
  for (double k : solver.knots()) {
    if (k >= x_max || !(d.tail(k) > 0.0)) continue;
    const double v = solver.rank(k);
    double left = v;
    if (k > 0.0 && is_cut(k)) left = solver.rank(k - 1e-9 * std::max(1.0, k));
    coarse.push_back({k, left, v});
  }
  if (coarse.empty()) throw PastSupport(0.0);
  // Bounded support: r(a) <= x_max - a, so the left limit at x_max is 0.
  if (std::isfinite(x_max)) coarse.push_back({x_max, 0.0, 0.0});

  std::vector<Node> nodes{coarse.front()};
  for (std::size_t i = 0; i + 1 < coarse.size(); ++i) {
    refine(solver, opts, coarse[i], coarse[i + 1], 0, nodes);
    nodes.push_back(coarse[i + 1]);
  }

  TailSup ts{};
  if (std::isinf(x_max)) {
    const double last = nodes.back().right;
    const ResidualLimit lim = d.residual_limit();
    if (lim.strictly_below || std::isinf(lim.value))
      ts = {std::max(last, lim.value), last > lim.value};
    else
      ts = {std::max(last, lim.value), true};
  }
  return RankFunction("Gittins", merge_pieces(nodes, x_max), {}, x_max, ts);
}

double segment_moment(const JobSizeDistribution& d, double b, double c, double p) {
  if (!(b < c)) throw DomainError("segment_moment needs b < c");
  if (!(p >= 0.0)) throw DomainError("segment_moment needs p >= 0");
  if (b < 0.0) throw DomainError("segment_moment needs b >= 0");
  const double hi = std::min(c, d.x_max());
  if (!(hi > b)) return 0.0;
  const auto cuts = d.breakpoints();
  auto f = [&](double t) {
    const double tail = d.tail(t);
    return tail == 0.0 ? 0.0 : (p + 1.0) * std::pow(t - b, p) * tail;
  };
  return integrate(f, b, hi, cuts, QuadOptions{1e-14, 1e-11, 4000});
}

double game_cost(const JobSizeDistribution& d, double w, double b, double c) {
  if (!(w >= 0.0)) throw DomainError("penalty must be non-negative");
  if (!(b >= 0.0 && b <= c)) throw DomainError("game_cost needs 0 <= b <= c");
  const double fb = d.tail(b);
  if (!(fb > 0.0)) throw PastSupport(b);
  if (c == b) return w;
  const double fc = c >= d.x_max() ? 0.0 : d.tail(c);
  const double service = (c >= d.x_max() ? tail_integral_to_end(d, b) : tail_integral(d, b, c)) / fb;
  return service + w * fc / fb;
}

namespace {

// Best per-unit-survival gain of playing on from age b with penalty w:
// sup over c of [w (tail(b) - tail(c)) - int_b^c tail] / tail(b), which is
// w - game_opt(w; b). Candidate stopping ages are knots plus geometric
// offsets just past b, refined by golden section.
class GameEvaluator {
 public:
  GameEvaluator(const JobSizeDistribution& d, double b) : d_(d), b_(b) {
    require_in_support(d, b);
    fb_ = d.tail(b);
    const double scale = std::max(1.0, b);
    for (int k = 1; k <= 44; ++k) stops_.push_back(b + scale * std::ldexp(1.0, -k));
    for (double t : make_age_grid(d, AgeGridSpec{512, std::nullopt}))
      if (t > b) stops_.push_back(t);
    std::sort(stops_.begin(), stops_.end());
    stops_.erase(std::unique(stops_.begin(), stops_.end()), stops_.end());
    while (!stops_.empty() && stops_.back() > d.x_max()) stops_.pop_back();
    tails_.resize(stops_.size());
    cum_.resize(stops_.size());
    double prev = b, acc = 0.0;
    for (std::size_t i = 0; i < stops_.size(); ++i) {
      acc += tail_integral(d, prev, stops_[i]);
      cum_[i] = acc;
      tails_[i] = stops_[i] >= d.x_max() ? 0.0 : d.tail(stops_[i]);
      prev = stops_[i];
    }
    to_end_ = tail_integral_to_end(d, b);
  }

  double advantage(double w) const {
    // c = b gives 0; c = x_max gives w tail(b) - int_b^xmax tail.
    double best = std::max(0.0, w * fb_ - to_end_);
    // The optimum can sit between stops, so refine around both the stop with
    // the largest gain and the stop with the largest gain per completion
    // (w - phi); near the rank every gain is still slightly negative.
    std::ptrdiff_t by_gain = -1, by_ratio = -1;
    double top_gain = -kInf, top_ratio = -kInf;
    for (std::size_t i = 0; i < stops_.size(); ++i) {
      const double done = fb_ - tails_[i];
      const double g = w * done - cum_[i];
      if (g > top_gain) {
        top_gain = g;
        by_gain = static_cast<std::ptrdiff_t>(i);
      }
      if (done > 0.0 && g / done > top_ratio) {
        top_ratio = g / done;
        by_ratio = static_cast<std::ptrdiff_t>(i);
      }
    }
    best = std::max(best, top_gain);
    auto neg_gain = [&](double c) {
      const double fc = c >= d_.x_max() ? 0.0 : d_.tail(c);
      return -(w * (fb_ - fc) - tail_integral(d_, b_, c));
    };
    for (std::ptrdiff_t pick : {by_gain, by_ratio}) {
      if (pick < 0) continue;
      const auto i = static_cast<std::size_t>(pick);
      const double lo = i > 0 ? stops_[i - 1] : b_;
      const double hi = i + 1 < stops_.size() ? stops_[i + 1] : stops_[i];
      best = std::max(best, -golden_min(neg_gain, lo, hi, 1e-13 * std::max(1.0, hi)));
    }
    return best / fb_;
  }

  double residual() const { return to_end_ / fb_; }

 private:
  const JobSizeDistribution& d_;
  double b_;
  double fb_;
  std::vector<double> stops_, tails_, cum_;
  double to_end_;
};

}  // namespace

double game_opt(const JobSizeDistribution& d, double w, double b) {
  if (!(w >= 0.0)) throw DomainError("penalty must be non-negative");
  if (w == 0.0) return 0.0;
  const GameEvaluator game(d, b);
  return w - game.advantage(w);
}

double rank_via_game(const JobSizeDistribution& d, double a) {
  const GameEvaluator game(d, a);
  const double m = game.residual();
  double lo = 0.0, hi = m * (1.0 + 1e-9) + 1e-300;
  for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    // Playing on strictly beats giving up exactly when mid exceeds the rank.
    if (game.advantage(mid) > 1e-13 * mid)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

RankFunction approx_gittins(const JobSizeDistribution& d, double eps, const GittinsBuildOptions& opts) {
  if (!(eps >= 0.0)) throw InvalidParameter("eps", "must be non-negative");
  if (std::isinf(d.residual_limit().value))
    throw UnboundedResidual("mean residual life is unbounded; approximate Gittins needs a finite sup");
  const RankFunction r = build_gittins(d, opts);
  const std::string label = "approx-gittins(" + format_double(eps) + ")";
  if (eps == 0.0) {
    const double a = worst_age(r);
    if (a >= d.x_max()) throw NoValidAge("eps = 0 and the Gittins rank never attains its sup");
    return r.with_spike({a, r.sup()}, label);
  }
  const double sup = r.sup();
  const double level = sup / (1.0 + eps);
  for (double a : make_age_grid(d, opts.grid)) {
    if (a >= d.x_max() || !(d.tail(a) > 0.0)) continue;
    const double v = r(a);
    if (v >= level) return r.with_spike({a, std::max((1.0 + eps) * v, sup)}, label);
  }
  throw NoValidAge("no grid age has rank within the factor 1+eps of the sup");
}

}  // namespace soaptail
