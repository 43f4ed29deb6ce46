#include "soaptail/sim.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "soaptail/errors.hpp"
#include "soaptail/rng.hpp"

namespace soaptail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Job {
  double arrival;
  double size;
  double age;
  std::uint64_t seq;
  std::size_t piece;
  std::size_t next_spike;
};

struct Entry {
  double rank;
  std::uint64_t seq;
  std::uint32_t slot;
};

// Min-heap order on (rank, seq): FCFS among equal ranks.
struct Later {
  bool operator()(const Entry& a, const Entry& b) const {
    return a.rank > b.rank || (a.rank == b.rank && a.seq > b.seq);
  }
};

// One replication. Waiting jobs keep the rank they had when they stopped
// being served; only the served job (or group) ages.
//
// A group is a set of jobs tied at the same rank, all on rising pieces. Under
// the FCFS tie-break such jobs would swap the server back and forth at zero
// time scale; the limit is to share the server so that their ranks rise
// together, job i getting the fraction (1/slope_i) / S, S = sum_j 1/slope_j.
// A lone rising job is a group of one.
class Engine {
 public:
  Engine(const SimConfig& cfg, unsigned rep)
      : cfg_(cfg),
        pieces_(cfg.policy.pieces()),
        spikes_(cfg.policy.spikes()),
        arrivals_(cfg.seed, rep, StreamRole::Arrivals),
        sizes_(cfg.seed, rep, StreamRole::Sizes) {}

  ReplicationResult run() {
    run_last_.assign(pieces_.size(), 0);
    fall_last_.assign(pieces_.size(), 0);
    for (std::size_t i = pieces_.size(); i-- > 0;) {
      fall_last_[i] = i;
      if (i + 1 < pieces_.size() && pieces_[i].slope <= 0.0 && pieces_[i + 1].slope <= 0.0 &&
          pieces_[i + 1].v0 <= pieces_[i].end_value())
        fall_last_[i] = fall_last_[i + 1];
      run_last_[i] = i;
      if (i + 1 < pieces_.size() && pieces_[i].slope > 0.0 && pieces_[i + 1].slope > 0.0) {
        const double a = pieces_[i].end_value(), b = pieces_[i + 1].v0;
        if (std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b))) run_last_[i] = run_last_[i + 1];
      }
    }
    ReplicationResult out;
    out.sorted.reserve(cfg_.n_jobs - cfg_.warmup);
    pending_ = cfg_.n_jobs - cfg_.warmup;
    next_arrival_ = arrivals_.exponential(cfg_.lambda);
    while (pending_ > 0) {
      if (mode_ == Mode::Idle) {
        if (cfg_.record_busy_periods && busy_started_) out.busy_periods.push_back(now_ - busy_start_);
        now_ = next_arrival_;
        busy_start_ = now_;
        busy_started_ = true;
        arrive();
        select();
        continue;
      }
      step(out);
    }
    long double in_system = 0.0L;
    for (const Job& j : jobs_)
      if (j.size > 0.0 && alive(j)) in_system += j.age;
    out.busy_time = static_cast<double>(busy_);
    out.work = static_cast<double>(work_ + in_system);
    out.work_error = out.work > 0 ? std::abs(out.busy_time - out.work) / out.work : 0.0;
    std::sort(out.sorted.begin(), out.sorted.end());
    std::sort(out.busy_periods.begin(), out.busy_periods.end());
    long double sum = 0.0L;
    for (double v : out.sorted) sum += v;
    out.mean = out.sorted.empty() ? 0.0 : static_cast<double>(sum / out.sorted.size());
    return out;
  }

 private:
  enum class Mode { Idle, Single, Group };
  enum class Event { None, Completion, PieceEnd, Spike, Crossing };

  bool alive(const Job& j) const { return j.seq != kDead; }

  bool at_spike(const Job& j) const { return j.next_spike < spikes_.size() && spikes_[j.next_spike].age == j.age; }
  double rank_of(const Job& j) const {
    return at_spike(j) ? spikes_[j.next_spike].rank : pieces_[j.piece].at(j.age);
  }
  double slope_of(const Job& j) const { return pieces_[j.piece].slope; }
  bool is_static(const Job& j) const { return at_spike(j) || slope_of(j) <= 0.0; }
  double next_spike_age(const Job& j) const {
    return j.next_spike < spikes_.size() ? spikes_[j.next_spike].age : kInf;
  }
  void sync_piece(Job& j) const {
    if (pieces_[j.piece].end > j.age) return;
    auto it = std::upper_bound(pieces_.begin() + static_cast<std::ptrdiff_t>(j.piece), pieces_.end(), j.age,
                               [](double a, const Piece& p) { return a < p.end; });
    j.piece = it == pieces_.end() ? pieces_.size() - 1 : static_cast<std::size_t>(it - pieces_.begin());
  }

  void push(std::uint32_t slot, double rank) {
    heap_.push_back({rank, jobs_[slot].seq, slot});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  }
  Entry pop() {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Entry e = heap_.back();
    heap_.pop_back();
    return e;
  }

  void arrive() {
    std::uint32_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      slot = static_cast<std::uint32_t>(jobs_.size());
      jobs_.push_back({});
    }
    Job& j = jobs_[slot];
    j = {now_, cfg_.dist.sample(sizes_), 0.0, arrivals_count_++, 0, 0};
    sync_piece(j);
    if (++in_system_ > cfg_.max_queue)
      throw UnstableConfig("simulation exceeded " + std::to_string(cfg_.max_queue) + " jobs in system");
    push(slot, rank_of(j));
    next_arrival_ = now_ + arrivals_.exponential(cfg_.lambda);
  }

  void complete(std::uint32_t slot, ReplicationResult& out) {
    Job& j = jobs_[slot];
    work_ += j.size;
    if (j.seq >= cfg_.warmup && j.seq < cfg_.n_jobs) {
      out.sorted.push_back(now_ - j.arrival);
      --pending_;
    }
    j.seq = kDead;
    free_.push_back(slot);
    --in_system_;
  }

  // Chooses what to serve next from the waiting heap.
  void select() {
    members_.clear();
    while (true) {
      if (heap_.empty()) {
        mode_ = Mode::Idle;
        return;
      }
      const Entry top = pop();
      Job& tj = jobs_[top.slot];
      if (is_static(tj)) {
        if (at_spike(tj)) {
          // Winning the comparison at the spike age lets the job through.
          ++tj.next_spike;
          push(top.slot, rank_of(tj));
          continue;
        }
        serve_single(top.slot);
        return;
      }
      ties_.assign(1, top);
      while (!heap_.empty() && heap_.front().rank == top.rank) ties_.push_back(pop());
      // Static jobs tied at this rank go first: a rising job would lose the
      // tie as soon as it received any service.
      auto it = std::find_if(ties_.begin(), ties_.end(), [&](const Entry& e) { return is_static(jobs_[e.slot]); });
      if (it != ties_.end()) {
        const Entry chosen = *it;
        for (const Entry& e : ties_)
          if (e.slot != chosen.slot) push(e.slot, e.rank);
        Job& cj = jobs_[chosen.slot];
        if (at_spike(cj)) {
          ++cj.next_spike;
          push(chosen.slot, rank_of(cj));
          continue;
        }
        serve_single(chosen.slot);
        return;
      }
      mode_ = Mode::Group;
      group_rank_ = top.rank;
      group_events_.clear();
      for (const Entry& e : ties_) {
        members_.push_back(e.slot);
        push_group_event(e.slot);
      }
      return;
    }
  }

  void serve_single(std::uint32_t slot) {
    mode_ = Mode::Single;
    active_ = slot;
  }

  // Puts whatever is in service back on the heap.
  void requeue() {
    if (mode_ == Mode::Single) {
      if (alive(jobs_[active_])) push(active_, rank_of(jobs_[active_]));
    } else if (mode_ == Mode::Group) {
      for (std::uint32_t m : members_) {
        const Job& j = jobs_[m];
        if (!alive(j)) continue;
        const double rk = rank_of(j);
        const bool snap = !at_spike(j) && std::abs(rk - group_rank_) <= 1e-12 * std::max(1.0, std::abs(group_rank_));
        push(m, snap ? group_rank_ : rk);
      }
    }
    mode_ = Mode::Idle;
  }

  void step(ReplicationResult& out) {
    const double dt_arrival = next_arrival_ - now_;
    if (mode_ == Mode::Single) {
      // A job whose rank does not rise: runs until something changes.
      Job& j = jobs_[active_];
      double target = std::min({j.size, pieces_[fall_last_[j.piece]].end, next_spike_age(j)});
      const double dt = target - j.age;
      if (dt_arrival < dt) {
        j.age += dt_arrival;
        advance_clock(dt_arrival);
        sync_piece(j);
        requeue();
        arrive();
        select();
        return;
      }
      advance_clock(dt);
      j.age = target;
      sync_piece(j);
      if (target == j.size) {
        complete(active_, out);
        mode_ = Mode::Idle;
      } else {
        requeue();
      }
      select();
      return;
    }

    // Group mode. Within a rising run a member's age is the inverse of the
    // rank, and the time to lift the common rank from R to R' is the total
    // age gained, sum_i (a_i(R') - a_i(R)).
    double next_rank = group_events_.front().rank;
    Event ev = Event::None;
    if (!heap_.empty() && heap_.front().rank < next_rank) {
      next_rank = heap_.front().rank;
      ev = Event::Crossing;
    }
    next_rank = std::max(next_rank, group_rank_);
    const double dt = time_to(next_rank);
    if (dt_arrival < dt) {
      // Linear while every member stays on its current piece.
      double share = 0.0, reach = next_rank;
      for (const GroupEvent& ge : group_events_) {
        const Piece& p = pieces_[jobs_[ge.slot].piece];
        share += 1.0 / p.slope;
        reach = std::min(reach, p.end_value());
      }
      double lo = group_rank_ + dt_arrival / share, hi = next_rank;
      if (lo >= reach) lo = group_rank_;
      else hi = lo;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        (time_to(mid) < dt_arrival ? lo : hi) = mid;
      }
      advance_clock(dt_arrival);
      settle_group(lo);
      requeue();
      arrive();
      select();
      return;
    }
    advance_clock(dt);
    if (ev == Event::Crossing) {
      settle_group(next_rank);
      requeue();
      select();
      return;
    }
    std::pop_heap(group_events_.begin(), group_events_.end(), LaterEvent{});
    const GroupEvent ge = group_events_.back();
    group_events_.pop_back();
    Job& j = jobs_[ge.slot];
    j.age = ge.age;
    sync_piece(j);
    settle_group(next_rank);
    if (ge.ev == Event::Completion) complete(ge.slot, out);
    requeue();
    select();
  }

  struct GroupEvent {
    double rank;
    double age;
    std::uint32_t slot;
    Event ev;
  };
  struct LaterEvent {
    bool operator()(const GroupEvent& a, const GroupEvent& b) const { return a.rank > b.rank; }
  };

  // Age at which a job in the rising run starting at its current piece
  // reaches rank R, capped at its next event.
  double age_at(const Job& j, double rank, std::size_t* piece = nullptr) const {
    const std::size_t last = run_last_[j.piece];
    auto it = std::lower_bound(pieces_.begin() + static_cast<std::ptrdiff_t>(j.piece),
                               pieces_.begin() + static_cast<std::ptrdiff_t>(last) + 1, rank,
                               [](const Piece& p, double v) { return p.end_value() < v; });
    if (it == pieces_.begin() + static_cast<std::ptrdiff_t>(last) + 1) --it;
    const double a = it->start + (rank - it->v0) / it->slope;
    if (piece) *piece = static_cast<std::size_t>(it - pieces_.begin());
    return std::clamp(a, j.age, std::min({j.size, next_spike_age(j), pieces_[last].end}));
  }

  double time_to(double rank) const {
    double dt = 0.0;
    for (const GroupEvent& ge : group_events_) {
      const Job& j = jobs_[ge.slot];
      dt += age_at(j, rank) - j.age;
    }
    return dt;
  }

  void push_group_event(std::uint32_t slot) {
    const Job& j = jobs_[slot];
    const std::size_t last = run_last_[j.piece];
    double target = j.size;
    Event e = Event::Completion;
    if (pieces_[last].end < target) {
      target = pieces_[last].end;
      e = Event::PieceEnd;
    }
    if (next_spike_age(j) < target) {
      target = next_spike_age(j);
      e = Event::Spike;
    }
    const Piece& p = pieces_[std::min(last, static_cast<std::size_t>(
                                                std::upper_bound(pieces_.begin(), pieces_.end(), target,
                                                                 [](double v, const Piece& q) { return v < q.end; }) -
                                                pieces_.begin()))];
    group_events_.push_back({p.at(target), target, slot, e});
    std::push_heap(group_events_.begin(), group_events_.end(), LaterEvent{});
  }

  // Moves the remaining members to the common rank R and leaves group mode
  // bookkeeping ready for requeue().
  void settle_group(double rank) {
    for (const GroupEvent& ge : group_events_) {
      Job& j = jobs_[ge.slot];
      std::size_t piece = j.piece;
      j.age = age_at(j, rank, &piece);
      j.piece = piece;
      sync_piece(j);
    }
    group_events_.clear();
    group_rank_ = rank;
  }

  void advance_clock(double dt) {
    now_ += dt;
    busy_ += dt;
  }

  static constexpr std::uint64_t kDead = std::numeric_limits<std::uint64_t>::max();

  const SimConfig& cfg_;

  const std::vector<Piece>& pieces_;
  const std::vector<Spike>& spikes_;
  RandomStream arrivals_;
  RandomStream sizes_;

  std::vector<Job> jobs_;
  std::vector<std::uint32_t> free_;
  std::vector<Entry> heap_;
  std::vector<Entry> ties_;
  std::vector<std::uint32_t> members_;
  std::vector<GroupEvent> group_events_;
  std::vector<std::size_t> run_last_;   // last piece of the continuous rising run
  std::vector<std::size_t> fall_last_;  // last piece of the run where the rank never goes up

  Mode mode_ = Mode::Idle;
  std::uint32_t active_ = 0;
  double group_rank_ = 0.0;

  double now_ = 0.0;
  double next_arrival_ = 0.0;
  double busy_start_ = 0.0;
  bool busy_started_ = false;
  long double busy_ = 0.0L;
  long double work_ = 0.0L;
  std::uint64_t arrivals_count_ = 0;
  std::uint64_t pending_ = 0;
  std::size_t in_system_ = 0;
};

// Pooled view over per-replication sorted samples.
class Pooled {
 public:
  explicit Pooled(std::vector<const std::vector<double>*> parts) : parts_(std::move(parts)) {
    for (const auto* p : parts_) {
      total_ += p->size();
      if (!p->empty()) {
        lo_ = std::min(lo_, p->front());
        hi_ = std::max(hi_, p->back());
      }
    }
  }
  std::size_t total() const { return total_; }
  double max() const { return hi_; }
  std::size_t count_above(double t) const {
    std::size_t n = 0;
    for (const auto* p : parts_) n += static_cast<std::size_t>(p->end() - std::upper_bound(p->begin(), p->end(), t));
    return n;
  }
  double survival(double t) const {
    return total_ ? static_cast<double>(count_above(t)) / static_cast<double>(total_) : 0.0;
  }
  double quantile(double q) const {
    if (!total_) return std::nan("");
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(total_)));
    const std::size_t need = k == 0 ? 1 : k;  // samples <= value
    double lo = lo_, hi = hi_;
    if (total_ - count_above(lo) >= need) return lo;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      (total_ - count_above(mid) >= need ? hi : lo) = mid;
    }
    return hi;
  }

 private:
  std::vector<const std::vector<double>*> parts_;
  std::size_t total_ = 0;
  double lo_ = kInf, hi_ = -kInf;
};

Pooled pooled_samples(const SimResult& r) {
  std::vector<const std::vector<double>*> parts;
  for (const auto& rep : r.reps) parts.push_back(&rep.sorted);
  return Pooled(std::move(parts));
}

TailPoint wilson(double t, std::size_t above, std::size_t n) {
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(above) / nn;
  const double den = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / den;
  // The interval always contains p; clamping only removes rounding at 0 and 1.
  return {t, p, std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
}

double slope_fit(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  return (n * sty - st * sy) / (n * stt - st * st);
}

DecayFit decay_over(const std::vector<const std::vector<double>*>& parts) {
  const Pooled all(parts);
  if (all.total() == 0) throw InsufficientData("no samples to fit");
  DecayFit fit{};
  fit.t_lo = all.quantile(0.90);
  fit.t_hi = all.quantile(0.9999);
  if (all.count_above(fit.t_lo) < 100'000)
    throw InsufficientData("decay fit needs at least 1e5 samples beyond q0.90, have " +
                           std::to_string(all.count_above(fit.t_lo)));
  constexpr int kPoints = 64;
  std::vector<double> ts;
  for (int i = 0; i < kPoints; ++i) ts.push_back(fit.t_lo + (fit.t_hi - fit.t_lo) * i / (kPoints - 1));
  auto fit_one = [&](const Pooled& s) {
    std::vector<double> x, y;
    for (double t : ts) {
      const double sv = s.survival(t);
      if (sv > 0.0) {
        x.push_back(t);
        y.push_back(-std::log(sv));
      }
    }
    return x.size() >= 2 ? slope_fit(x, y) : std::nan("");
  };
  fit.rate = fit_one(all);
  for (const auto* p : parts) fit.per_rep.push_back(fit_one(Pooled({p})));
  if (parts.size() >= 2) {
    double mean = 0.0, var = 0.0;
    for (double v : fit.per_rep) mean += v;
    mean /= static_cast<double>(parts.size());
    for (double v : fit.per_rep) var += (v - mean) * (v - mean);
    var /= static_cast<double>(parts.size() - 1);
    fit.stderr_rate = std::sqrt(var / static_cast<double>(parts.size()));
  } else {
    fit.stderr_rate = std::nan("");
  }
  return fit;
}

}  // namespace

SimConfig make_sim_config(JobSizeDistribution d, double lambda, RankFunction policy, std::uint64_t n_jobs,
                          unsigned replications, std::uint64_t seed) {
  return SimConfig{std::move(d), lambda, std::move(policy), n_jobs, n_jobs / 10, seed, replications};
}

double SimResult::survival(double t) const { return pooled_samples(*this).survival(t); }
double SimResult::quantile(double q) const { return pooled_samples(*this).quantile(q); }

std::vector<double> SimResult::per_rep_means() const {
  std::vector<double> out;
  for (const auto& r : reps) out.push_back(r.mean);
  return out;
}

double SimResult::max_work_error() const {
  double e = 0.0;
  for (const auto& r : reps) e = std::max(e, r.work_error);
  return e;
}

SimResult simulate(const SimConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw InvalidParameter("lambda", "arrival rate must be positive");
  SystemParams::from_lambda(cfg.dist, cfg.lambda);  // throws UnstableConfig when rho >= 1
  if (!(cfg.n_jobs > cfg.warmup)) throw InvalidParameter("jobs", "n_jobs must exceed warmup");
  if (cfg.replications == 0) throw InvalidParameter("reps", "need at least one replication");

  SimResult res;
  res.policy = cfg.policy.label();
  res.reps.resize(cfg.replications);
  std::vector<std::exception_ptr> errors(cfg.replications);
  std::atomic<unsigned> next{0};
  auto worker = [&] {
    for (unsigned i = next++; i < cfg.replications; i = next++) {
      try {
        res.reps[i] = Engine(cfg, i).run();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, cfg.replications);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const Pooled all = pooled_samples(res);
  res.total = all.total();
  const std::vector<double> means = res.per_rep_means();
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  res.mean = mean;
  if (means.size() >= 2) {
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(means.size() - 1);
    res.stderr_mean = std::sqrt(var / static_cast<double>(means.size()));
    const boost::math::students_t t(static_cast<double>(means.size() - 1));
    res.ci_half = boost::math::quantile(t, 0.975) * res.stderr_mean;
  } else {
    res.stderr_mean = res.ci_half = std::nan("");
  }
  for (std::size_t i = 0; i < kReportedQuantiles.size(); ++i) res.quantiles[i] = all.quantile(kReportedQuantiles[i]);

  const double t0 = std::max(res.quantiles[0], 1e-300), t1 = all.max();
  constexpr int kTailPoints = 512;
  for (int i = 0; i < kTailPoints; ++i) {
    const double t = t1 > t0 ? t0 * std::pow(t1 / t0, static_cast<double>(i) / (kTailPoints - 1)) : t0;
    res.tail.push_back(wilson(t, all.count_above(t), res.total));
  }
  return res;
}

DecayFit fit_decay(const SimResult& r) {
  std::vector<const std::vector<double>*> parts;
  for (const auto& rep : r.reps) parts.push_back(&rep.sorted);
  return decay_over(parts);
}

DecayFit fit_busy_period_decay(const SimResult& r) {
  std::vector<const std::vector<double>*> parts;
  for (const auto& rep : r.reps) parts.push_back(&rep.busy_periods);
  return decay_over(parts);
}

std::vector<RatioPoint> tail_ratio(const SimResult& r, const JobSizeDistribution& d, const SystemParams& p) {
  std::vector<RatioPoint> out;
  out.push_back({0.0, r.survival(0.0) / d.tail(0.0), 1.0, 1.0});
  for (const TailPoint& tp : r.tail) {
    const double target = d.tail((1.0 - p.rho) * tp.t);
    if (target > 0.0)
      out.push_back({tp.t, tp.survival / target, tp.ci_lo / target, tp.ci_hi / target});
    else
      out.push_back({tp.t, kInf, kInf, kInf});
  }
  return out;
}

}  // namespace soaptail
