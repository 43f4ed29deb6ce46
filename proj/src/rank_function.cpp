#include "soaptail/rank_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "soaptail/errors.hpp"
#include "soaptail/format.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_number(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ConfigError("policy text: bad number '" + tok + "'");
  return v;
}

}  // namespace

double Piece::end_value() const {
  if (slope == 0.0) return v0;
  if (std::isinf(end)) return slope > 0 ? kInf : -kInf;
  return v0 + slope * (end - start);
}

RankFunction::RankFunction(std::string label, std::vector<Piece> pieces, std::vector<Spike> spikes,
                           double x_max, TailSup tail_sup)
    : label_(std::move(label)),
      pieces_(std::move(pieces)),
      spikes_(std::move(spikes)),
      x_max_(x_max),
      tail_sup_(tail_sup) {
  if (pieces_.empty()) throw InvalidParameter("pieces", "rank function needs at least one piece");
  if (pieces_.front().start != 0.0) throw InvalidParameter("pieces", "first piece must start at age 0");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!(pieces_[i].end > pieces_[i].start)) throw InvalidParameter("pieces", "empty piece");
    if (i + 1 < pieces_.size() && pieces_[i].end != pieces_[i + 1].start)
      throw InvalidParameter("pieces", "pieces must be contiguous");
  }
  std::sort(spikes_.begin(), spikes_.end(), [](const Spike& a, const Spike& b) { return a.age < b.age; });
}

std::size_t RankFunction::piece_index(double a) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), a,
                             [](double v, const Piece& p) { return v < p.start; });
  if (it == pieces_.begin()) return 0;
  return static_cast<std::size_t>(it - pieces_.begin()) - 1;
}

double RankFunction::linear(double a) const { return pieces_[piece_index(a)].at(a); }

double RankFunction::operator()(double a) const {
  auto it = std::lower_bound(spikes_.begin(), spikes_.end(), a,
                             [](const Spike& s, double v) { return s.age < v; });
  if (it != spikes_.end() && it->age == a) return it->rank;
  return linear(a);
}

double RankFunction::sup_over(double lo, double hi) const {
  double best = -kInf;
  for (const Piece& p : pieces_) {
    if (p.end <= lo || p.start >= hi) continue;
    const double from = std::max(lo, p.start);
    const double to = std::min(hi, p.end);
    best = std::max(best, p.at(from));
    best = std::max(best, to == p.end ? p.end_value() : p.at(to));
  }
  for (const Spike& s : spikes_)
    if (s.age >= lo && s.age < hi) best = std::max(best, s.rank);
  const Piece& last = pieces_.back();
  // The tail sup describes the rank as age grows without bound, so it only
  // enters unbounded ranges.
  if (std::isinf(last.end) && hi >= x_max_ && hi > last.start) best = std::max(best, tail_sup_.value);
  return best;
}

double RankFunction::sup() const { return sup_over(0.0, kInf); }

RankFunction RankFunction::with_spike(Spike s, std::string label) const {
  std::vector<Spike> spikes = spikes_;
  spikes.erase(std::remove_if(spikes.begin(), spikes.end(), [&](const Spike& o) { return o.age == s.age; }),
               spikes.end());
  spikes.push_back(s);
  return RankFunction(std::move(label), pieces_, std::move(spikes), x_max_, tail_sup_);
}

RankFunction make_policy(PolicyKind kind, double a_star, double x_max) {
  const double end = x_max;
  switch (kind) {
    case PolicyKind::Fcfs:
      return RankFunction("FCFS", {{0.0, end, 0.0, 0.0}}, {}, x_max, {0.0, true});
    case PolicyKind::Fb:
      return RankFunction("FB", {{0.0, end, 0.0, 1.0}}, {}, x_max, {x_max, false});
    case PolicyKind::Step: {
      if (!(a_star > 0.0)) throw InvalidParameter("a_star", "step age must be positive");
      const std::string label = "step(" + format_double(a_star) + ")";
      if (a_star >= x_max) return RankFunction(label, {{0.0, end, 0.0, 1.0}}, {}, x_max, {x_max, false});
      return RankFunction(label, {{0.0, a_star, 0.0, 1.0}, {a_star, end, a_star, 0.0}}, {}, x_max,
                          {a_star, true});
    }
    case PolicyKind::Spike: {
      if (!(a_star > 0.0)) throw InvalidParameter("a_star", "spike age must be positive");
      return RankFunction("spike(" + format_double(a_star) + ")", {{0.0, end, 0.0, 0.0}},
                          {{a_star, 1.0}}, x_max, {0.0, true});
    }
  }
  throw InvalidParameter("policy", "unknown policy kind");
}

double worst_age(const RankFunction& r) {
  const auto& pieces = r.pieces();
  double piece_max = -kInf, spike_max = -kInf;
  for (const Piece& p : pieces) piece_max = std::max({piece_max, p.v0, p.end_value()});
  for (const Spike& s : r.spikes()) spike_max = std::max(spike_max, s.rank);
  if (std::isinf(piece_max) && piece_max > 0) return r.x_max();

  const double finite_max = std::max(piece_max, spike_max);
  const double tol = 1e-8 * std::max(1.0, std::abs(finite_max));
  const TailSup& ts = r.tail_sup();
  // A tail sup that is only approached wins over pieces within tolerance, but
  // never over an explicit spike at least as high.
  if (!ts.attained && ts.value >= piece_max - tol && ts.value > spike_max) return r.x_max();
  if (ts.value > finite_max + tol) return r.x_max();

  const double level = finite_max - tol;
  double best = kInf;
  for (const Spike& s : r.spikes())
    if (s.rank >= level) {
      best = std::min(best, s.age);
      break;
    }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = pieces[i];
    if (p.start >= best) break;
    if (r(p.start) >= level) return std::min(best, p.start);
    if (p.slope > 0 && p.end_value() >= level) {
      // Max approached at the right end; attained there unless this is the
      // last piece. A downward jump at p.end still counts p.end as the closure point.
      const bool last = i + 1 == pieces.size();
      return std::min(best, last ? r.x_max() : p.end);
    }
  }
  return std::isinf(best) ? r.x_max() : best;
}

WIntervalSet w_intervals(const RankFunction& r, double w, double horizon) {
  WIntervalSet out{w, {}, false};
  std::vector<WInterval> runs;
  bool in_run = false;
  double run_start = 0.0;
  auto close = [&](double c) {
    if (in_run) runs.push_back({run_start, c, false});
    in_run = false;
  };
  auto open = [&](double b) {
    if (!in_run) {
      run_start = b;
      in_run = true;
    }
  };
  double scan_end = 0.0;
  for (const Piece& p : r.pieces()) {
    if (p.start >= horizon) break;
    const double e = std::min(p.end, horizon);
    scan_end = e;
    const double v_start = p.v0;
    const double v_end = e == p.end ? p.end_value() : p.at(e);
    if (p.slope == 0.0) {
      if (v_start <= w) open(p.start);
      else close(p.start);
    } else if (p.slope > 0) {
      if (v_start > w) {
        close(p.start);
      } else {
        open(p.start);
        if (v_end > w) close(p.start + (w - p.v0) / p.slope);
      }
    } else {
      if (v_start <= w) {
        open(p.start);
      } else {
        close(p.start);
        if (v_end <= w) open(std::max(p.start, p.start + (w - p.v0) / p.slope));
      }
    }
  }
  if (in_run) {
    const bool truncated = scan_end < r.x_max();
    runs.push_back({run_start, truncated ? scan_end : r.x_max(), truncated});
    out.open_ended = truncated;
  }

  // Spikes above w split a run at a single point.
  for (const Spike& s : r.spikes()) {
    if (s.rank <= w) continue;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (runs[k].b < s.age && s.age < runs[k].c) {
        WInterval right{s.age, runs[k].c, runs[k].open};
        runs[k].c = s.age;
        runs[k].open = false;
        runs.insert(runs.begin() + static_cast<std::ptrdiff_t>(k) + 1, right);
        break;
      }
    }
    if (s.age == 0.0 && !runs.empty() && runs.front().b == 0.0) {
      // r(0) > w: c0 = 0, the run continues as k = 1.
      runs.insert(runs.begin(), WInterval{0.0, 0.0, false});
    }
  }

  if (runs.empty() || runs.front().b != 0.0) out.intervals.push_back({0.0, 0.0, false});
  for (const WInterval& iv : runs)
    if (iv.c > iv.b || (out.intervals.empty() && iv.b == 0.0)) out.intervals.push_back(iv);
  return out;
}

JobProfile job_profile(const RankFunction& r, double x) {
  if (!(x > 0.0)) throw InvalidParameter("x", "size must be positive");
  const double wx = r.sup_over(0.0, x);
  const double y = w_intervals(r, left_limit_level(wx)).intervals.front().c;
  const double z = w_intervals(r, wx).intervals.front().c;
  return {x, wx, y, z};
}

std::string to_text(const RankFunction& r) {
  std::ostringstream os;
  os << "label " << r.label() << '\n';
  os << "x_max " << format_double(r.x_max()) << '\n';
  os << "tail_sup " << format_double(r.tail_sup().value) << ' ' << (r.tail_sup().attained ? 1 : 0) << '\n';
  for (const Piece& p : r.pieces())
    os << "piece " << format_double(p.start) << ' ' << format_double(p.end) << ' ' << format_double(p.v0)
       << ' ' << format_double(p.slope) << '\n';
  for (const Spike& s : r.spikes()) os << "spike " << format_double(s.age) << ' ' << format_double(s.rank) << '\n';
  return os.str();
}

RankFunction from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line, label = "custom";
  double x_max = kInf;
  TailSup ts;
  std::vector<Piece> pieces;
  std::vector<Spike> spikes;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    auto need = [&](std::size_t n) {
      if (toks.size() != n)
        throw ConfigError("policy text line " + std::to_string(line_no) + ": expected " + std::to_string(n) +
                          " values after '" + key + "'");
    };
    if (key == "label") {
      const auto first = line.find_first_not_of(" \t", line.find("label") + 5);
      if (first == std::string::npos) need(1);
      label = line.substr(first);
      while (!label.empty() && (label.back() == ' ' || label.back() == '\r')) label.pop_back();
    } else if (key == "x_max") {
      need(1);
      x_max = parse_number(toks[0]);
    } else if (key == "tail_sup") {
      need(2);
      ts = {parse_number(toks[0]), toks[1] == "1"};
    } else if (key == "piece") {
      need(4);
      pieces.push_back({parse_number(toks[0]), parse_number(toks[1]), parse_number(toks[2]), parse_number(toks[3])});
    } else if (key == "spike") {
      need(2);
      spikes.push_back({parse_number(toks[0]), parse_number(toks[1])});
    } else {
      throw ConfigError("policy text line " + std::to_string(line_no) + ": unknown record '" + key + "'");
    }
  }
  return RankFunction(label, std::move(pieces), std::move(spikes), x_max, ts);
}

std::string to_csv(const RankFunction& r, const std::vector<double>& ages) {
  std::string out = "age,rank\n";
  for (double a : ages) out += format_double(a) + "," + format_double(r(a)) + "\n";
  return out;
}

}  // namespace soaptail
