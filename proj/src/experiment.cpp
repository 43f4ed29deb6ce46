#include "soaptail/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "soaptail/errors.hpp"
#include "soaptail/format.hpp"
#include "soaptail/gittins.hpp"
#include "soaptail/heavy_tail.hpp"
#include "soaptail/light_tail.hpp"
#include "soaptail/sim.hpp"

namespace soaptail {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Splits on commas outside parentheses.
std::vector<std::string> split_top(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

double to_number(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ConfigError(field + ": '" + text + "' is not a number");
  return v;
}

std::uint64_t to_count(const std::string& text, const std::string& field) {
  const double v = to_number(text, field);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e18) throw ConfigError(field + ": '" + text + "' is not a count");
  return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& text, const std::string& field) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(field + ": '" + text + "' is not a boolean");
}

// Function-call syntax "name(arg)"; nullopt when the text has no parentheses.
std::optional<std::pair<std::string, std::string>> call_form(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos) return std::nullopt;
  if (text.back() != ')') throw ConfigError("unbalanced parentheses in '" + text + "'");
  return std::pair{trim(text.substr(0, open)), trim(text.substr(open + 1, text.size() - open - 2))};
}

std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }
json bracket_json(const Bracket& b) { return json{{"lo", num(b.lo)}, {"hi", num(b.hi)}}; }

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string tail_kind_name(TailKind k) {
  switch (k) {
    case TailKind::NicelyLight: return "NicelyLight";
    case TailKind::NicelyHeavy: return "NicelyHeavy";
    case TailKind::Other: return "Other";
  }
  return "?";
}

// Output writer: every file gets the version, command and resolved spec.
class Outputs {
 public:
  Outputs(Command c, const ExperimentSpec& spec, fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    std::ostringstream h;
    h << "# soaptail " << kVersion << "\n# command: " << to_string(c) << "\n";
    std::istringstream in(resolved_spec(spec));
    for (std::string line; std::getline(in, line);) h << "# " << line << "\n";
    header_ = h.str();
    meta_ = json{{"version", kVersion}, {"command", to_string(c)}, {"spec", resolved_spec(spec)}};
  }

  void csv(const std::string& name, const std::string& body) { write(name, header_ + body); }
  void text(const std::string& name, const std::string& body) { write(name, header_ + body); }
  void json_file(const std::string& name, json body) {
    json out;
    out["_meta"] = meta_;
    for (auto& [k, v] : body.items()) out[k] = v;
    write(name, out.dump(2) + "\n");
  }
  std::vector<fs::path> written() const { return written_; }

 private:
  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << content;
    if (!f) throw ConfigError("write failed for " + p.string());
    written_.push_back(p);
  }

  fs::path dir_;
  std::string header_;
  json meta_;
  std::vector<fs::path> written_;
};

struct BuiltPolicy {
  PolicySpec spec;
  RankFunction rank;
};

std::vector<BuiltPolicy> build_all(const ExperimentSpec& spec, const JobSizeDistribution& d) {
  if (spec.policies.empty()) throw ConfigError("policies.list: no policies given");
  std::vector<BuiltPolicy> out;
  for (const PolicySpec& p : spec.policies) out.push_back({p, build_policy(p, d, spec)});
  return out;
}

std::vector<double> default_ages(const JobSizeDistribution& d) {
  const double hi = std::min(d.x_max(), 10.0 * d.mean());
  return parse_grid("linspace(0, " + format_double(hi) + ", 201)");
}

std::vector<double> grid_or_default(const std::string& expr, const JobSizeDistribution& d) {
  return trim(expr) == "auto" ? default_ages(d) : parse_grid(expr);
}

json profile_json(const RankFunction& r, double x) {
  const JobProfile jp = job_profile(r, x);
  json iv = json::array();
  const WIntervalSet set = w_intervals(r, jp.w_x, std::max(1e3 * x, 1e6));
  std::size_t shown = 0;
  for (const WInterval& w : set.intervals) {
    if (shown++ == 16) break;
    iv.push_back({{"b", num(w.b)}, {"c", num(w.c)}, {"open", w.open}});
  }
  return json{{"x", num(x)},
              {"w_x", num(jp.w_x)},
              {"y_x", num(jp.y_x)},
              {"z_x", num(jp.z_x)},
              {"n_intervals", set.intervals.size()},
              {"intervals", iv}};
}

std::vector<std::filesystem::path> cmd_rank(const ExperimentSpec& spec, const fs::path& out_dir) {
  Outputs out(Command::Rank, spec, out_dir);
  const JobSizeDistribution d = experiment_distribution(spec);
  const auto policies = build_all(spec, d);
  const std::vector<double> ages = grid_or_default(spec.ages, d);

  std::string csv = "age";
  for (const auto& p : policies) csv += "," + p.rank.label();
  csv += "\n";
  for (double a : ages) {
    csv += format_double(a);
    for (const auto& p : policies) csv += "," + format_double(p.rank(a));
    csv += "\n";
  }
  out.csv("rank.csv", csv);

  json list = json::array();
  const std::vector<double> sizes = parse_grid(spec.sizes);
  for (const auto& p : policies) {
    json profiles = json::array();
    for (double x : sizes) profiles.push_back(profile_json(p.rank, x));
    list.push_back({{"policy", p.rank.label()},
                    {"worst_age", num(worst_age(p.rank))},
                    {"sup_rank", num(p.rank.sup())},
                    {"sup_attained", p.rank.tail_sup().attained},
                    {"x_max", num(p.rank.x_max())},
                    {"profiles", profiles}});
    out.text("policy_" + slug(p.rank.label()) + ".txt", to_text(p.rank));
  }
  out.json_file("worst_age.json", json{{"distribution", d.describe()}, {"policies", list}});
  return out.written();
}

json light_report_json(const LightTailReport& r) {
  json j{{"gamma_X", num(r.gamma_X)},
         {"gamma_W", {{"value", num(r.gamma_W.value)},
                      {"bracket", bracket_json(r.gamma_W.bracket)},
                      {"pole_first_order", r.gamma_W.pole.first_order},
                      {"pole_drift", num(r.gamma_W.pole.drift)}}},
         {"sigma_at_gamma_sigma", num(r.sigma.sigma_at_gamma)},
         {"gamma_sigma", {{"value", num(r.sigma.gamma_sigma)}, {"bracket", bracket_json(r.sigma.value_bracket)}}},
         {"d_fcfs", {{"value", num(r.d_fcfs)}, {"bracket", bracket_json(r.d_fcfs_bracket)}}},
         {"d_fb", {{"value", num(r.d_fb)}, {"bracket", bracket_json(r.d_fb_bracket)}}},
         {"branch_point", r.branch_point}};
  return j;
}

std::vector<std::filesystem::path> cmd_analyze_light(const ExperimentSpec& spec, const fs::path& out_dir) {
  Outputs out(Command::AnalyzeLight, spec, out_dir);
  const JobSizeDistribution d = experiment_distribution(spec);
  if (!d.is_light()) throw ClassMismatch("analyze-light needs a nicely light-tailed distribution, got " + d.describe());
  const SystemParams sp = experiment_system(spec, d);
  const auto policies = build_all(spec, d);

  json body{{"distribution", d.describe()}, {"lambda", num(sp.lambda)}, {"rho", num(sp.rho)}};
  body["chain"] = light_report_json(decay_rates(d, sp));
  json list = json::array();
  for (const auto& p : policies) {
    const double a = worst_age(p.rank);
    const LightTailReport r = decay_rates(d, sp, std::min(a, d.x_max()));
    list.push_back({{"policy", p.rank.label()},
                    {"worst_age", num(a)},
                    {"verdict", to_string(*r.verdict)},
                    {"d_policy", num(*r.d_policy)},
                    {"d_policy_bracket", bracket_json(*r.d_policy_bracket)},
                    {"branch_point", r.branch_point}});
  }
  body["policies"] = list;
  const GittinsVerdict g = classify_gittins(d);
  body["gittins"] = {{"verdict", to_string(g.verdict)},
                     {"nbue_class", to_string(g.nbue.cls)},
                     {"nbue_margin", num(g.nbue.nbue_margin)},
                     {"enbue_age", g.nbue.enbue_age ? num(*g.nbue.enbue_age) : json(nullptr)},
                     {"worst_age", num(g.worst_age)},
                     {"verdict_by_worst_age", to_string(g.by_worst_age)},
                     {"routes_agree", g.agrees()}};
  out.json_file("light_report.json", body);
  return out.written();
}

std::vector<std::filesystem::path> cmd_analyze_heavy(const ExperimentSpec& spec, const fs::path& out_dir) {
  Outputs out(Command::AnalyzeHeavy, spec, out_dir);
  const JobSizeDistribution d = experiment_distribution(spec);
  if (!d.is_heavy()) throw ClassMismatch("analyze-heavy needs a nicely heavy-tailed distribution, got " + d.describe());
  const SystemParams sp = experiment_system(spec, d);
  const auto policies = build_all(spec, d);
  const std::vector<double> sizes = parse_grid(spec.sizes);
  const std::vector<double> moments = parse_grid(spec.moments);

  json list = json::array();
  std::string csv = "policy,x,p,n_intervals,segment_sum,sum_ratio,integral,integral_ratio\n";
  for (const auto& p : policies) {
    const HeavyTailFit f = fit_exponents(p.rank, d, sizes, spec.horizon);
    json rows = json::array();
    for (const FitRow& r : f.rows)
      rows.push_back({{"x", num(r.x)},
                      {"w_x", num(r.w_x)},
                      {"n_intervals", r.n_intervals},
                      {"max_gap_ratio", num(r.max_gap_ratio)},
                      {"max_closed_c", r.max_closed_c ? num(*r.max_closed_c) : json(nullptr)}});
    json entry{{"policy", p.rank.label()},
               {"zeta", num(f.zeta)},
               {"theta", num(f.theta)},
               {"eta", num(f.eta)},
               {"zeta_eval", num(f.zeta_eval)},
               {"theta_eval", num(f.theta_eval)},
               {"eta_eval", num(f.eta_eval)},
               {"vacuous", f.vacuous},
               {"collinear", f.collinear},
               {"zeta_theta_fit", {{"n", f.zeta_theta_fit.n}, {"rss", num(f.zeta_theta_fit.rss)}, {"r2", num(f.zeta_theta_fit.r2)}}},
               {"eta_fit", {{"n", f.eta_fit.n}, {"rss", num(f.eta_fit.rss)}, {"r2", num(f.eta_fit.r2)}}}};
    if (f.sufficient) {
      entry["alpha"] = num(*f.alpha);
      entry["beta"] = num(*f.beta);
      entry["sufficient"] = f.sufficient->holds;
      entry["lhs"] = num(f.sufficient->lhs);
      entry["rhs"] = num(f.sufficient->rhs);
      entry["margin"] = num(f.sufficient->margin);
    }
    entry["rows"] = rows;
    list.push_back(entry);

    for (const DiagnosticRow& r : diagnostic_curves(p.rank, d, sp, sizes, moments, spec.horizon)) {
      csv += p.rank.label() + "," + format_double(r.x) + "," + format_double(r.p) + "," + std::to_string(r.n_intervals) +
             "," + format_double(r.segment_sum) + "," + format_double(r.sum_ratio) + "," + format_double(r.integral) +
             "," + format_double(r.integral_ratio) + "\n";
    }
  }
  out.json_file("heavy_fit.json", json{{"distribution", d.describe()}, {"rho", num(sp.rho)}, {"policies", list}});
  out.csv("diagnostics.csv", csv);
  return out.written();
}

double rep_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[k == 0 ? 0 : k - 1];
}

std::vector<std::filesystem::path> cmd_simulate(const ExperimentSpec& spec, const fs::path& out_dir) {
  Outputs out(Command::Simulate, spec, out_dir);
  const JobSizeDistribution d = experiment_distribution(spec);
  const SystemParams sp = experiment_system(spec, d);
  const auto policies = build_all(spec, d);
  const std::uint64_t warmup = spec.warmup.value_or(spec.jobs / 10);

  std::string summary = "policy,distribution,lambda,rho,replication,recorded,mean,ci_half";
  for (double q : kReportedQuantiles) summary += ",q" + format_double(q);
  summary += ",work_error\n";
  std::string compare = "policy,analytic_decay,fitted_decay,fitted_stderr,ratio,t_lo,t_hi\n";
  bool busy_row_done = false;
  std::string busy_row;

  for (const auto& p : policies) {
    SimConfig cfg{d, sp.lambda, p.rank, spec.jobs, warmup, spec.seed, spec.reps, spec.threads};
    cfg.record_busy_periods = spec.busy_periods;
    const SimResult res = simulate(cfg);
    const std::string prefix = p.rank.label() + "," + d.describe() + "," + format_double(sp.lambda) + "," +
                               format_double(sp.rho) + ",";
    for (std::size_t i = 0; i < res.reps.size(); ++i) {
      const auto& rep = res.reps[i];
      summary += prefix + std::to_string(i) + "," + std::to_string(rep.sorted.size()) + "," + format_double(rep.mean) +
                 ",nan";
      for (double q : kReportedQuantiles) summary += "," + format_double(rep_quantile(rep.sorted, q));
      summary += "," + format_double(rep.work_error) + "\n";
    }
    summary += prefix + "pooled," + std::to_string(res.total) + "," + format_double(res.mean) + "," +
               format_double(res.ci_half);
    for (double q : res.quantiles) summary += "," + format_double(q);
    summary += "," + format_double(res.max_work_error()) + "\n";

    std::string tail = d.is_heavy() ? "t,survival,ci_lo,ci_hi,ratio,ratio_lo,ratio_hi\n" : "t,survival,ci_lo,ci_hi\n";
    if (d.is_heavy()) {
      // tail_ratio leads with the t = 0 point, then follows res.tail.
      const std::vector<RatioPoint> ratio = tail_ratio(res, d, sp);
      for (std::size_t i = 0; i < ratio.size(); ++i) {
        const RatioPoint& rp = ratio[i];
        const TailPoint tp = i == 0 ? TailPoint{0.0, res.survival(0.0), 1.0, 1.0} : res.tail[i - 1];
        tail += format_double(tp.t) + "," + format_double(tp.survival) + "," + format_double(tp.ci_lo) + "," +
                format_double(tp.ci_hi) + "," + format_double(rp.ratio) + "," + format_double(rp.ci_lo) + "," +
                format_double(rp.ci_hi) + "\n";
      }
    } else {
      for (const TailPoint& tp : res.tail)
        tail += format_double(tp.t) + "," + format_double(tp.survival) + "," + format_double(tp.ci_lo) + "," +
                format_double(tp.ci_hi) + "\n";
    }
    out.csv("tail_" + slug(p.rank.label()) + ".csv", tail);

    if (d.is_light()) {
      const double a = worst_age(p.rank);
      const double analytic = *decay_rates(d, sp, std::min(a, d.x_max())).d_policy;
      double fitted = std::nan(""), se = std::nan(""), lo = std::nan(""), hi = std::nan("");
      try {
        const DecayFit f = fit_decay(res);
        fitted = f.rate;
        se = f.stderr_rate;
        lo = f.t_lo;
        hi = f.t_hi;
      } catch (const InsufficientData&) {
      }
      compare += p.rank.label() + "," + format_double(analytic) + "," + format_double(fitted) + "," + format_double(se) +
                 "," + format_double(fitted / analytic) + "," + format_double(lo) + "," + format_double(hi) + "\n";
      if (spec.busy_periods && !busy_row_done) {
        // Busy periods do not depend on the (work-conserving) policy.
        busy_row_done = true;
        const double analytic_bp = -gamma_sigma(d, sp).gamma_sigma;
        double fb = std::nan(""), fse = std::nan(""), flo = std::nan(""), fhi = std::nan("");
        try {
          const DecayFit f = fit_busy_period_decay(res);
          fb = f.rate;
          fse = f.stderr_rate;
          flo = f.t_lo;
          fhi = f.t_hi;
        } catch (const InsufficientData&) {
        }
        busy_row = "busy_period," + format_double(analytic_bp) + "," + format_double(fb) + "," + format_double(fse) +
                   "," + format_double(fb / analytic_bp) + "," + format_double(flo) + "," + format_double(fhi) + "\n";
      }
    }
  }
  out.csv("sim_summary.csv", summary);
  if (d.is_light()) out.csv("compare.csv", compare + busy_row);
  return out.written();
}

std::vector<std::filesystem::path> cmd_classify(const ExperimentSpec& spec, const fs::path& out_dir) {
  Outputs out(Command::Classify, spec, out_dir);
  const JobSizeDistribution d = experiment_distribution(spec);
  const TailClass tc = d.tail_class();
  json body{{"distribution", d.describe()},
            {"tail_class", tail_kind_name(tc.kind)},
            {"mean", num(d.mean())},
            {"x_max", num(d.x_max())}};
  if (tc.kind == TailKind::NicelyHeavy) {
    body["alpha"] = num(tc.alpha);
    body["beta"] = num(tc.beta);
  }
  if (d.is_light()) {
    const GittinsVerdict g = classify_gittins(d);
    body["nbue_class"] = to_string(g.nbue.cls);
    body["nbue_margin"] = num(g.nbue.nbue_margin);
    body["enbue_age"] = g.nbue.enbue_age ? num(*g.nbue.enbue_age) : json(nullptr);
    body["gittins_verdict"] = to_string(g.verdict);
    body["gittins_worst_age"] = num(g.worst_age);
    body["gittins_verdict_by_worst_age"] = to_string(g.by_worst_age);
    body["routes_agree"] = g.agrees();
  } else {
    body["gittins_worst_age"] = num(worst_age(build_gittins(d, {AgeGridSpec{spec.knots, std::nullopt}})));
  }
  json list = json::array();
  for (const auto& p : spec.policies.empty() ? std::vector<BuiltPolicy>{} : build_all(spec, d)) {
    const double a = worst_age(p.rank);
    json e{{"policy", p.rank.label()}, {"worst_age", num(a)}};
    if (d.is_light()) e["verdict"] = to_string(classify_soap(std::min(a, d.x_max()), d.x_max()));
    list.push_back(e);
  }
  body["policies"] = list;
  out.json_file("classify.json", body);
  return out.written();
}

const std::map<std::string, std::set<std::string>> kKnownKeys{
    {"experiment", {"name", "command"}},
    {"system", {"lambda", "rho"}},
    {"policies", {"list"}},
    {"grid", {"ages", "sizes", "moments", "horizon", "knots"}},
    {"sim", {"jobs", "warmup", "seed", "reps", "threads", "busy_periods"}},
};

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Rank: return "rank";
    case Command::AnalyzeLight: return "analyze-light";
    case Command::AnalyzeHeavy: return "analyze-heavy";
    case Command::Simulate: return "simulate";
    case Command::Classify: return "classify";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::Rank, Command::AnalyzeLight, Command::AnalyzeHeavy, Command::Simulate, Command::Classify})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown command '" + name + "'");
}

std::string PolicySpec::text() const {
  switch (type) {
    case PolicyType::Gittins: return "gittins";
    case PolicyType::ApproxGittins: return "approx-gittins(" + format_double(param) + ")";
    case PolicyType::Fcfs: return "fcfs";
    case PolicyType::Fb: return "fb";
    case PolicyType::Step: return "step(" + format_double(param) + ")";
    case PolicyType::Spike: return "spike(" + format_double(param) + ")";
    case PolicyType::File: return "file(" + path + ")";
  }
  return "?";
}

PolicySpec parse_policy(const std::string& text) {
  const std::string t = trim(text);
  const auto call = call_form(t);
  if (!call) {
    const std::string n = lower(t);
    if (n == "gittins") return {PolicyType::Gittins, 0.0, {}};
    if (n == "fcfs") return {PolicyType::Fcfs, 0.0, {}};
    if (n == "fb") return {PolicyType::Fb, 0.0, {}};
    throw ConfigError("policies.list: unknown policy '" + text + "'");
  }
  const std::string n = lower(call->first);
  if (n == "file") {
    if (call->second.empty()) throw ConfigError("policies.list: file() needs a path");
    return {PolicyType::File, 0.0, call->second};
  }
  const double v = to_number(call->second, "policies.list");
  if (n == "step" || n == "spike") {
    if (!(v >= 0.0)) throw ConfigError("policies.list: " + n + " age must be non-negative");
    return {n == "step" ? PolicyType::Step : PolicyType::Spike, v, {}};
  }
  if (n == "approx-gittins") {
    if (!(v >= 0.0)) throw ConfigError("policies.list: approx-gittins epsilon must be non-negative");
    return {PolicyType::ApproxGittins, v, {}};
  }
  throw ConfigError("policies.list: unknown policy '" + text + "'");
}

std::vector<double> parse_grid(const std::string& expr) {
  const std::string t = trim(expr);
  if (t.empty()) throw ConfigError("empty grid");
  if (const auto call = call_form(t)) {
    const std::string n = lower(call->first);
    const auto args = split_top(call->second);
    if ((n != "linspace" && n != "geomspace") || args.size() != 3)
      throw ConfigError("grid '" + expr + "': expected linspace(a, b, n) or geomspace(a, b, n)");
    const double a = to_number(args[0], "grid"), b = to_number(args[1], "grid");
    const std::uint64_t k = to_count(args[2], "grid");
    if (k == 0) throw ConfigError("grid '" + expr + "': need at least one point");
    if (n == "geomspace" && !(a > 0.0 && b > 0.0)) throw ConfigError("grid '" + expr + "': geomspace needs positive ends");
    std::vector<double> out;
    for (std::uint64_t i = 0; i < k; ++i) {
      const double f = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
      double v = n == "linspace" ? a + (b - a) * f : a * std::pow(b / a, f);
      // Snap round-off (8 from 2 * 128^(3/7)) to the nearby short decimal.
      const double shortv = std::strtod(format_short(v).c_str(), nullptr);
      if (std::abs(shortv - v) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(v)) v = shortv;
      out.push_back(v);
    }
    if (k > 1) out.back() = b;
    return out;
  }
  std::vector<double> out;
  for (const std::string& item : split_top(t)) out.push_back(to_number(item, "grid"));
  return out;
}

ExperimentSpec parse_experiment(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentSpec spec;
  spec.base_dir = base_dir;
  bool have_dist = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' outside any section");
    if (section == "distribution") {
      have_dist = true;
      for (const auto& [key, value] : body) {
        const std::string field = "distribution." + key;
        if (key == "family") {
          spec.distribution.family = lower(trim(value.data()));
          continue;
        }
        std::vector<double> vals;
        for (const std::string& item : split_top(value.data())) vals.push_back(to_number(item, field));
        if (vals.empty()) throw ConfigError(field + ": no value");
        spec.distribution.params[key] = vals;
      }
      continue;
    }
    const auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      if (!known->second.count(key)) throw ConfigError("unknown key '" + field + "'");
      const std::string& v = value.data();
      if (section == "experiment") {
        if (key == "name") spec.name = trim(v);
        // command is informational; the CLI subcommand decides what runs
        if (key == "command") parse_command(trim(v));
      } else if (section == "system") {
        const double x = to_number(v, field);
        if (!(x > 0.0)) throw ConfigError(field + ": must be positive");
        (key == "lambda" ? spec.lambda : spec.rho) = x;
      } else if (section == "policies") {
        for (const std::string& item : split_top(v)) spec.policies.push_back(parse_policy(item));
      } else if (section == "grid") {
        if (key == "ages") spec.ages = trim(v);
        if (key == "sizes") spec.sizes = trim(v);
        if (key == "moments") spec.moments = trim(v);
        if (key == "horizon") spec.horizon = to_number(v, field);
        if (key == "knots") spec.knots = to_count(v, field);
        try {
          if (key == "ages" && trim(v) != "auto") parse_grid(v);
          if (key == "sizes" || key == "moments") parse_grid(v);
        } catch (const ConfigError& e) {
          throw ConfigError(field + ": " + e.what());
        }
      } else if (section == "sim") {
        if (key == "jobs") spec.jobs = to_count(v, field);
        if (key == "warmup") spec.warmup = to_count(v, field);
        if (key == "seed") spec.seed = to_count(v, field);
        if (key == "reps") spec.reps = static_cast<unsigned>(to_count(v, field));
        if (key == "threads") spec.threads = static_cast<unsigned>(to_count(v, field));
        if (key == "busy_periods") spec.busy_periods = to_bool(v, field);
      }
    }
  }
  if (!have_dist || spec.distribution.family.empty()) throw ConfigError("distribution.family: missing");
  if (spec.lambda && spec.rho) throw ConfigError("system: give lambda or rho, not both");
  if (!(spec.horizon > 0.0)) throw ConfigError("grid.horizon: must be positive");
  if (spec.knots < 16) throw ConfigError("grid.knots: need at least 16");
  if (spec.reps == 0) throw ConfigError("sim.reps: need at least one replication");
  try {
    make_distribution(spec.distribution);
  } catch (const InvalidParameter& e) {
    throw ConfigError("distribution." + e.field() + ": " + e.what());
  }
  return spec;
}

ExperimentSpec load_experiment(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_experiment(s.str(), path.parent_path());
}

std::string resolved_spec(const ExperimentSpec& spec) {
  std::ostringstream o;
  o << "[experiment]\nname = " << spec.name << "\n";
  o << "[distribution]\nfamily = " << spec.distribution.family << "\n";
  for (const auto& [k, v] : spec.distribution.params) o << k << " = " << format_list(v) << "\n";
  o << "[system]\n";
  if (spec.lambda) o << "lambda = " << format_double(*spec.lambda) << "\n";
  if (spec.rho) o << "rho = " << format_double(*spec.rho) << "\n";
  o << "[policies]\nlist = ";
  for (std::size_t i = 0; i < spec.policies.size(); ++i) o << (i ? ", " : "") << spec.policies[i].text();
  o << "\n[grid]\nages = " << spec.ages << "\nsizes = " << spec.sizes << "\nmoments = " << spec.moments
    << "\nhorizon = " << format_double(spec.horizon) << "\nknots = " << spec.knots << "\n";
  o << "[sim]\njobs = " << spec.jobs << "\nwarmup = " << spec.warmup.value_or(spec.jobs / 10) << "\nseed = " << spec.seed
    << "\nreps = " << spec.reps << "\nbusy_periods = " << (spec.busy_periods ? "true" : "false") << "\n";
  return o.str();
}

JobSizeDistribution experiment_distribution(const ExperimentSpec& spec) { return make_distribution(spec.distribution); }

SystemParams experiment_system(const ExperimentSpec& spec, const JobSizeDistribution& d) {
  if (spec.lambda) return SystemParams::from_lambda(d, *spec.lambda);
  if (spec.rho) return SystemParams::from_rho(d, *spec.rho);
  throw ConfigError("system: lambda or rho is required for this command");
}

RankFunction build_policy(const PolicySpec& p, const JobSizeDistribution& d, const ExperimentSpec& spec) {
  GittinsBuildOptions opts;
  opts.grid.knots = spec.knots;
  switch (p.type) {
    case PolicyType::Gittins: return build_gittins(d, opts);
    case PolicyType::ApproxGittins: return approx_gittins(d, p.param, opts);
    case PolicyType::Fcfs: return make_policy(PolicyKind::Fcfs, 0.0, d.x_max());
    case PolicyType::Fb: return make_policy(PolicyKind::Fb, 0.0, d.x_max());
    case PolicyType::Step: return make_policy(PolicyKind::Step, p.param, d.x_max());
    case PolicyType::Spike: return make_policy(PolicyKind::Spike, p.param, d.x_max());
    case PolicyType::File: {
      const fs::path path = fs::path(p.path).is_absolute() ? fs::path(p.path) : spec.base_dir / p.path;
      std::ifstream f(path, std::ios::binary);
      if (!f) throw ConfigError("policies.list: cannot read policy file " + path.string());
      std::ostringstream s;
      s << f.rdbuf();
      return from_text(s.str());
    }
  }
  throw ConfigError("policies.list: unhandled policy");
}

std::vector<fs::path> run_command(Command c, const ExperimentSpec& spec, const fs::path& out_dir) {
  switch (c) {
    case Command::Rank: return cmd_rank(spec, out_dir);
    case Command::AnalyzeLight: return cmd_analyze_light(spec, out_dir);
    case Command::AnalyzeHeavy: return cmd_analyze_heavy(spec, out_dir);
    case Command::Simulate: return cmd_simulate(spec, out_dir);
    case Command::Classify: return cmd_classify(spec, out_dir);
  }
  return {};
}

}  // namespace soaptail
