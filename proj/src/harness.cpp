#include "vgb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <thread>
#include <tuple>

#include "vgb/chain.hpp"
#include "vgb/errors.hpp"
#include "vgb/metrics.hpp"
#include "vgb/training.hpp"

namespace vgb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Schema

enum class Kind { integer, real, boolean, string };

struct Field {
  std::string key;
  Kind kind;
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;
  Json dflt = nullptr; ///< null: no default (optional unless required)
  std::vector<std::string> choices = {};
  bool required = false;
};

Field int_f(std::string k, double lo, double hi, Json d) {
  return {std::move(k), Kind::integer, lo, hi, false, false, std::move(d)};
}
Field real_f(std::string k, double lo, double hi, Json d, bool lo_open = false,
             bool hi_open = false) {
  return {std::move(k), Kind::real, lo, hi, lo_open, hi_open, std::move(d)};
}
Field bool_f(std::string k, bool d) { return {std::move(k), Kind::boolean, 0, 0, false, false, d}; }
Field choice_f(std::string k, std::vector<std::string> c, std::string d) {
  Field f{std::move(k), Kind::string, 0, 0, false, false, d};
  f.choices = std::move(c);
  return f;
}
Field str_f(std::string k, std::string d) { return {std::move(k), Kind::string, 0, 0, false, false, d}; }

const std::map<std::string, std::vector<Field>>& task_schemas() {
  static const std::map<std::string, std::vector<Field>> s = {
      {"abc", {int_f("H", 1, 64, 4), real_f("eps", 0, kInf, 0.3), real_f("alpha", 0, 1, 0.5, true)}},
      {"delayed", {int_f("H", 1, 64, 4)}},
      {"kl_abc", {int_f("H", 1, 64, 4), real_f("eps", 0, kInf, 0.25), real_f("beta", 0, kInf, 0.25, true)}},
      {"parity", {int_f("K", 2, 64, 4), int_f("M", 1, 64, 2)}},
      {"dyck",
       {int_f("H", 1, 64, 8), real_f("p_square", 0, 1, 0.8), real_f("lambda", 0, 1, 0.1, false, true),
        real_f("alpha", 0, 1, 0.5, true), str_f("prefix", "")}},
      {"beam_cx", {int_f("H", 2, 64, 12)}},
  };
  return s;
}

const std::map<std::string, std::vector<std::string>>& task_oracles() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"abc", {"perturbed", "exact", "geometric", "trained"}},
      {"delayed", {"delayed", "exact", "trained"}},
      {"kl_abc", {"perturbed", "exact"}},
      {"parity", {"ansatz", "exact", "trained"}},
      {"dyck", {"geometric", "exact", "trained"}},
      {"beam_cx", {"exact"}},
  };
  return s;
}

const std::map<std::string, std::vector<Field>>& sampler_schemas() {
  static const std::map<std::string, std::vector<Field>> s = {
      {"vgb", {int_f("T", 1, 1e12, nullptr), choice_f("return", {"last", "uniform_time"}, "last")}},
      {"vgb_first_leaf",
       {choice_f("mode", {"enumerate", "k_candidates"}, "enumerate"), int_f("K", 1, 1e6, 32),
        int_f("step_cap", 1, 1e12, 1000000)}},
      {"vgb_large_alphabet",
       {int_f("T", 1, 1e12, nullptr), real_f("c_act", 0, kInf, 1.0, true),
        real_f("delta", 0, 1, 0.1, true, true)}},
      {"vgb_momentum", {int_f("step_cap", 1, 1e12, 1000000)}},
      {"alrs",
       {choice_f("mode", {"enumerate", "large_alphabet"}, "enumerate"), real_f("M", 0, kInf, 4.0, true),
        real_f("eps", 0, 1, 0.01, true, true), bool_f("restart", true)}},
      {"outcome_rs",
       {real_f("M", 0, kInf, 1.0, true), real_f("eps", 0, 1, 0.01, true, true), bool_f("fast_path", true)}},
      {"block_bon", {int_f("B", 1, 1e6, 4), int_f("L", 1, 1e6, 1)}},
      {"block_rs", {int_f("B", 1, 1e6, 4), int_f("L", 1, 1e6, 1)}},
      {"best_of_n", {int_f("N", 1, 1e7, 8)}},
      {"beam", {int_f("W", 1, 1e6, 4)}},
      {"base", {}},
  };
  return s;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> m = {
      "tv",       "kl",          "chi2",           "cov_q",      "kl_regret",  "accuracy",
      "distinct_correct", "hist_l1", "nonleaf_fraction", "steps_mean", "steps_p50", "restarts_mean"};
  return m;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs)
    out += (out.empty() ? "" : ", ") + x;
  return out;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_scalar(const std::string& path, const Field& f, const Json& v) {
  switch (f.kind) {
  case Kind::boolean:
    if (!v.is_boolean())
      fail(path, "expected a boolean");
    return;
  case Kind::string:
    if (!v.is_string())
      fail(path, "expected a string");
    if (!f.choices.empty() &&
        std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end())
      fail(path, "unknown value '" + v.get<std::string>() + "' (expected one of " + join(f.choices) + ")");
    return;
  case Kind::integer:
    if (!v.is_number_integer())
      fail(path, "expected an integer");
    break;
  case Kind::real:
    if (!v.is_number())
      fail(path, "expected a number");
    break;
  }
  const double x = v.get<double>();
  const bool below = f.lo_open ? !(x > f.lo) : !(x >= f.lo);
  const bool above = f.hi_open ? !(x < f.hi) : !(x <= f.hi);
  if (below || above) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "value %g out of range %c%g, %g%c", x, f.lo_open ? '(' : '[', f.lo,
                  f.hi, f.hi_open ? ')' : ']');
    fail(path, buf);
  }
}

/// Validates `section` (minus "name") against `fields`, filling defaults.
/// Numeric fields may be non-empty arrays (grid axes).
Json resolve_section(const std::string& path, const Json& section, const std::string& name,
                     const std::vector<Field>& fields) {
  Json out = Json::object();
  out["name"] = name;
  for (const auto& [k, v] : section.items()) {
    if (k == "name")
      continue;
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == k; });
    if (it == fields.end())
      fail(path + "." + k, "unknown key for '" + name + "'");
    if (v.is_array()) {
      if (v.empty())
        fail(path + "." + k, "empty grid");
      if (it->kind == Kind::boolean || (it->kind == Kind::string && it->choices.empty()))
        fail(path + "." + k, "grid not supported for this key");
      for (std::size_t i = 0; i < v.size(); ++i)
        check_scalar(path + "." + k + "[" + std::to_string(i) + "]", *it, v[i]);
    } else {
      check_scalar(path + "." + k, *it, v);
    }
    out[k] = v;
  }
  for (const Field& f : fields)
    if (!out.contains(f.key) && !f.dflt.is_null())
      out[f.key] = f.dflt;
  return out;
}

std::string section_name(const std::string& path, const Json& section) {
  if (!section.is_object())
    fail(path, "expected an object");
  if (!section.contains("name"))
    fail(path + ".name", "missing required field");
  if (!section["name"].is_string())
    fail(path + ".name", "expected a string");
  return section["name"].get<std::string>();
}

int horizon_of(const Json& task) {
  if (task["name"] == "parity")
    return task["K"].get<int>() * task["M"].get<int>();
  return task["H"].get<int>();
}

/// T = c kappa^4 H^2 log(kappa H / 1e-3) with kappa = 1 + eps.
long default_steps(const Json& task, double c) {
  const double kappa = 1.0 + (task.contains("eps") ? task["eps"].get<double>() : 0.0);
  const double H = horizon_of(task);
  return static_cast<long>(std::ceil(c * std::pow(kappa, 4) * H * H * std::log(kappa * H / 1e-3)));
}

bool has_grid(const Json& section) {
  for (const auto& [k, v] : section.items())
    if (v.is_array())
      return true;
  return false;
}

bool needs_steps(const Json& sampler) {
  const auto n = sampler["name"].get<std::string>();
  return (n == "vgb" || n == "vgb_large_alphabet") && !sampler.contains("T");
}

std::map<std::string, double> numeric_params(const Json& section) {
  std::map<std::string, double> p;
  for (const auto& [k, v] : section.items())
    if (v.is_number())
      p[k] = v.get<double>();
  return p;
}

// ---------------------------------------------------------------------------

RunRecord as_record(Seq y, int H) {
  RunRecord r;
  r.is_leaf = static_cast<int>(y.size()) == H;
  r.step_count = static_cast<long>(y.size());
  r.terminal = std::move(y);
  return r;
}

double linf(const SeqDist& a, const SeqDist& b) {
  double m = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    m = std::max(m, std::abs(v - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, v] : b)
    if (!a.count(k))
      m = std::max(m, std::abs(v));
  return m;
}

Seq draw_from(const TargetDist& target, Rng& rng) {
  double u = rng.uniform();
  const Seq* last = nullptr;
  for (const auto& [y, p] : target.prob) {
    last = &y;
    if (u < p)
      return y;
    u -= p;
  }
  return last ? *last : Seq{};
}

int hardware_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

} // namespace

// ---------------------------------------------------------------------------

ExperimentConfig validate_config(const std::string& json_text) {
  Json raw;
  try {
    raw = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!raw.is_object())
    fail("config", "expected a single top-level object");

  static const std::vector<std::string> top = {"task", "oracle", "sampler", "replicates", "seed",
                                               "metrics", "output", "jobs", "step_constant",
                                               "coverage_delta"};
  for (const auto& [k, v] : raw.items())
    if (std::find(top.begin(), top.end(), k) == top.end())
      fail(k, "unknown key");

  ExperimentConfig cfg;
  if (!raw.contains("task"))
    fail("task", "missing required field");
  if (!raw.contains("sampler"))
    fail("sampler", "missing required field");

  const std::string tname = section_name("task", raw["task"]);
  auto ts = task_schemas().find(tname);
  if (ts == task_schemas().end())
    fail("task.name", "unknown task '" + tname + "' (expected one of " + join(task_names()) + ")");
  cfg.task = resolve_section("task", raw["task"], tname, ts->second);

  const auto& allowed = task_oracles().at(tname);
  Json oracle_raw = raw.contains("oracle") ? raw["oracle"] : Json::object();
  if (!oracle_raw.is_object())
    fail("oracle", "expected an object");
  if (!oracle_raw.contains("name"))
    oracle_raw["name"] = allowed.front();
  const std::string oname = section_name("oracle", oracle_raw);
  if (std::find(allowed.begin(), allowed.end(), oname) == allowed.end())
    fail("oracle.name", "unknown oracle '" + oname + "' for task '" + tname + "' (expected one of " +
                            join(allowed) + ")");
  std::vector<Field> ofields = {bool_f("true_leaves", false)};
  if (oname == "trained") {
    ofields.push_back(int_f("rollouts", 1, 1e7, 10000));
    ofields.push_back(int_f("train_seed", 0, 9007199254740992.0, 0));
    ofields.push_back(str_f("path", ""));
  }
  cfg.oracle = resolve_section("oracle", oracle_raw, oname, ofields);

  const std::string sname = section_name("sampler", raw["sampler"]);
  auto ss = sampler_schemas().find(sname);
  if (ss == sampler_schemas().end()) {
    std::vector<std::string> names;
    for (const auto& [k, v] : sampler_schemas())
      names.push_back(k);
    fail("sampler.name", "unknown sampler '" + sname + "' (expected one of " + join(names) + ")");
  }
  cfg.sampler = resolve_section("sampler", raw["sampler"], sname, ss->second);

  auto scalar = [&](const std::string& key, const Field& f) -> std::optional<Json> {
    if (!raw.contains(key))
      return std::nullopt;
    check_scalar(key, f, raw[key]);
    return raw[key];
  };
  if (auto v = scalar("replicates", int_f("replicates", 1, 1e9, nullptr)))
    cfg.replicates = v->get<long>();
  if (raw.contains("seed")) {
    const Json& s = raw["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      fail("seed", "expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (auto v = scalar("jobs", int_f("jobs", 1, 1024, nullptr)))
    cfg.jobs = v->get<int>();
  if (auto v = scalar("step_constant", real_f("step_constant", 0, kInf, nullptr, true)))
    cfg.step_constant = v->get<double>();
  if (auto v = scalar("coverage_delta", real_f("coverage_delta", 0, 1, nullptr, true)))
    cfg.coverage_delta = v->get<double>();
  if (auto v = scalar("output", str_f("output", "")))
    cfg.output = v->get<std::string>();

  if (raw.contains("metrics")) {
    const Json& m = raw["metrics"];
    if (!m.is_array() || m.empty())
      fail("metrics", "expected a non-empty array of metric names");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string path = "metrics[" + std::to_string(i) + "]";
      if (!m[i].is_string())
        fail(path, "expected a string");
      const auto name = m[i].get<std::string>();
      if (std::find(metric_names().begin(), metric_names().end(), name) == metric_names().end())
        fail(path, "unknown metric '" + name + "'");
      if (name == "hist_l1" && tname != "dyck")
        fail(path, "hist_l1 is defined for the dyck task only");
      cfg.metrics.push_back(name);
    }
  } else {
    cfg.metrics = {"tv", "kl", "accuracy", "steps_mean"};
  }

  if (!has_grid(cfg.task) && needs_steps(cfg.sampler))
    cfg.sampler["T"] = default_steps(cfg.task, cfg.step_constant);
  return cfg;
}

std::vector<ExperimentPoint> expand_points(const ExperimentConfig& cfg) {
  // Axes in a fixed order: task keys, oracle keys, sampler keys (sorted).
  struct Axis {
    int section;
    std::string key;
    Json values;
  };
  std::vector<Axis> axes;
  const Json* sections[3] = {&cfg.task, &cfg.oracle, &cfg.sampler};
  for (int s = 0; s < 3; ++s)
    for (const auto& [k, v] : sections[s]->items())
      if (v.is_array())
        axes.push_back({s, k, v});

  std::vector<ExperimentPoint> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    ExperimentPoint p{cfg.task, cfg.oracle, cfg.sampler};
    Json* dst[3] = {&p.task, &p.oracle, &p.sampler};
    for (std::size_t a = 0; a < axes.size(); ++a)
      (*dst[axes[a].section])[axes[a].key] = axes[a].values[idx[a]];
    if (needs_steps(p.sampler))
      p.sampler["T"] = default_steps(p.task, cfg.step_constant);
    out.push_back(std::move(p));
    // Odometer increment, last axis fastest.
    std::size_t a = axes.size();
    for (; a > 0; --a) {
      if (++idx[a - 1] < axes[a - 1].values.size())
        break;
      idx[a - 1] = 0;
    }
    if (a == 0)
      return out;
  }
}

// ---------------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x))
    return "nan";
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

void write_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows)
    os << csv_escape(r.task) << ',' << csv_escape(r.algorithm) << ',' << csv_escape(r.oracle) << ','
       << r.seed << ',' << r.H << ',' << csv_escape(r.params_json) << ',' << csv_escape(r.metric)
       << ',' << format_double(r.value) << ',' << format_double(r.stderr_) << ',' << r.n << ','
       << csv_escape(r.notes) << '\n';
}

// ---------------------------------------------------------------------------

TaskInstance build_task(const Json& task) {
  const auto name = task.at("name").get<std::string>();
  const std::string prefix = task.contains("prefix") ? task["prefix"].get<std::string>() : "";
  return make_task(name, numeric_params(task), prefix);
}

ValueOracle build_oracle(const TaskInstance& task, const Json& oracle) {
  const auto name = oracle.at("name").get<std::string>();
  const bool true_leaves = oracle.value("true_leaves", false);
  if (name == "trained") {
    const std::string path = oracle.value("path", std::string{});
    if (!path.empty())
      return load_bundle(path, task.tilt).oracle;
    TrainConfig tc = task.name == "parity" ? TrainConfig::parity()
                     : task.name == "dyck" ? TrainConfig::dyck()
                                           : TrainConfig::abc();
    tc.seed = oracle.value("train_seed", std::uint64_t{0});
    const auto data =
        generate_rollouts(*task.model, task.tilt, oracle.value("rollouts", 10000L), tc.seed);
    return train_all_depths(data, task.tilt, tc, true_leaves, hardware_jobs()).oracle;
  }
  const ValueOracle& base = task.oracle(name);
  return true_leaves ? with_true_leaves(base, task.tilt, task.H()) : base;
}

Sampler build_sampler(const TaskInstance& task, const ValueOracle& oracle, const Json& s) {
  const auto name = s.at("name").get<std::string>();
  std::shared_ptr<const BaseModel> model = task.model;
  const int H = task.H();

  if (name == "vgb") {
    const long T = s.at("T").get<long>();
    const ReturnMode mode = s.value("return", std::string("last")) == "uniform_time"
                                ? ReturnMode::uniform_time
                                : ReturnMode::last;
    return [=](Rng& rng) { return vgb_run(*model, oracle, T, mode, rng); };
  }
  if (name == "vgb_first_leaf") {
    FirstLeafConfig c;
    c.mode = s.value("mode", std::string("enumerate")) == "k_candidates" ? FirstLeafMode::k_candidates
                                                                           : FirstLeafMode::enumerate;
    c.K = s.value("K", 32);
    c.step_cap = s.value("step_cap", 1000000L);
    return [=](Rng& rng) { return vgb_first_leaf(*model, oracle, c, rng); };
  }
  if (name == "vgb_large_alphabet") {
    const long T = s.at("T").get<long>();
    const double eps_v = task.params.count("eps") ? task.params.at("eps") : 0.0;
    const RsHyper hy = large_alphabet_defaults(s.value("c_act", 1.0), eps_v, s.value("delta", 0.1), H, T);
    return [=](Rng& rng) { return vgb_large_alphabet_exact(*model, oracle, T, hy.M, hy.delta_rej, rng); };
  }
  if (name == "vgb_momentum") {
    const long cap = s.value("step_cap", 1000000L);
    return [=](Rng& rng) { return vgb_momentum(*model, oracle, cap, rng); };
  }
  if (name == "alrs") {
    AlrsConfig c;
    c.mode = s.value("mode", std::string("enumerate")) == "large_alphabet" ? AlrsMode::large_alphabet
                                                                             : AlrsMode::enumerate;
    c.M = s.value("M", 4.0);
    c.eps = s.value("eps", 0.01);
    c.restart_on_stuck = s.value("restart", true);
    return [=](Rng& rng) { return action_level_rs(*model, oracle, c, rng); };
  }
  if (name == "outcome_rs") {
    OutcomeRsConfig c;
    c.M = s.value("M", 1.0);
    c.eps = s.value("eps", 0.01);
    c.binary_fast_path = s.value("fast_path", true);
    const TiltSpec tilt = task.tilt;
    return [=](Rng& rng) { return outcome_level_rs(*model, tilt, c, rng); };
  }
  if (name == "block_bon" || name == "block_rs") {
    BlockConfig c;
    c.B = s.value("B", 4);
    c.L = s.value("L", 1);
    if (name == "block_bon")
      return [=](Rng& rng) { return block_bon(*model, oracle, c, rng); };
    return [=](Rng& rng) { return block_rs(*model, oracle, c, rng); };
  }
  if (name == "best_of_n") {
    const int N = s.value("N", 8);
    const auto reward = task.reward;
    return [=](Rng& rng) {
      BaseSampler base = [&](Rng& r) { return as_record(sample_path(*model, r), H); };
      return best_of_n(base, reward, N, H, rng);
    };
  }
  if (name == "beam") {
    const int W = s.value("W", 4);
    return [=](Rng& rng) { return beam_search(*model, oracle, W, rng); };
  }
  if (name == "base")
    return [=](Rng& rng) { return as_record(sample_path(*model, rng), H); };
  throw ConfigError("sampler.name: unknown sampler '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

struct PointOutcome {
  std::vector<RunRecord> records;
  long failed = 0;
  std::string first_error;
};

PointOutcome run_replicates(const Sampler& sampler, long R, std::uint64_t seed, int jobs) {
  std::vector<std::optional<RunRecord>> slots(static_cast<std::size_t>(R));
  std::vector<std::string> errors(static_cast<std::size_t>(R));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i; (i = next.fetch_add(1)) < R;) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
      const auto t0 = std::chrono::steady_clock::now();
      try {
        RunRecord r = sampler(rng);
        r.seed = rng.seed();
        r.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        slots[static_cast<std::size_t>(i)] = std::move(r);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
        if (errors[static_cast<std::size_t>(i)].empty())
          errors[static_cast<std::size_t>(i)] = "error";
      }
    }
  };
  const int n = static_cast<int>(std::min<long>(std::max(jobs, 1), R));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();

  PointOutcome out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.records.push_back(std::move(*slots[i]));
    } else {
      if (out.failed++ == 0)
        out.first_error = "replicate " + std::to_string(i) + ": " + errors[i];
    }
  }
  return out;
}

/// Lazily computed exact quantities shared by the metrics of one point.
class PointContext {
public:
  PointContext(const TaskInstance& task, const ValueOracle& oracle) : task_(task), oracle_(oracle) {}

  const TargetDist& target() {
    if (!target_)
      target_ = task_.target();
    return *target_;
  }
  const std::vector<Seq>& support() {
    if (!support_) {
      support_.emplace();
      for (const auto& [y, p] : target().prob)
        support_->push_back(y);
    }
    return *support_;
  }
  double kappa() {
    if (!kappa_) {
      ProfileOptions o;
      o.prune_zero_subtrees = true;
      kappa_ = error_profile(*task_.model, oracle_, task_.exact->oracle(), target(), o).kappa_avg();
    }
    return *kappa_;
  }

private:
  const TaskInstance& task_;
  const ValueOracle& oracle_;
  std::optional<TargetDist> target_;
  std::optional<std::vector<Seq>> support_;
  std::optional<double> kappa_;
};

void metric_value(const std::string& metric, const TaskInstance& task, PointContext& ctx,
                  const std::vector<RunRecord>& recs, const ExperimentConfig& cfg, CsvRow& row) {
  const int H = task.H();
  row.n = static_cast<long>(recs.size());
  auto leaves = [&] {
    SeqDist c = leaf_counts(recs);
    if (c.empty())
      throw DegenerateTarget("no leaf terminals");
    return c;
  };
  if (metric == "tv" || metric == "chi2" || metric == "cov_q") {
    const EmpiricalDist e = smooth(leaves(), SmoothMode::none);
    row.n = static_cast<long>(e.n);
    if (metric == "tv") {
      row.value = tv(e.prob, ctx.target().prob);
    } else if (metric == "chi2") {
      row.value = chi2(e.prob, ctx.target().prob);
    } else {
      const double c = 48.0 * H * ctx.kappa() * ctx.kappa() / cfg.coverage_delta;
      row.value = coverage_quantile(ctx.target(), e.prob, c);
      row.notes = "threshold=" + format_double(c);
    }
  } else if (metric == "kl" || metric == "kl_regret") {
    const EmpiricalDist e = smooth(leaves(), SmoothMode::add_half, &ctx.support());
    row.n = static_cast<long>(e.n);
    const double d = kl(e.prob, ctx.target().prob);
    if (metric == "kl") {
      row.value = d;
      row.notes = "add_half";
    } else {
      const double beta = task.tilt.has_reward() ? task.tilt.beta : 1.0;
      row.value = beta * d;
      row.notes = "add_half;beta=" + format_double(beta);
    }
  } else if (metric == "accuracy" || metric == "distinct_correct") {
    const auto ad = accuracy_diversity(recs, task.reward, H);
    if (metric == "accuracy") {
      row.value = ad.accuracy;
      const double n = static_cast<double>(recs.size());
      if (n > 1)
        row.stderr_ = std::sqrt(ad.accuracy * (1.0 - ad.accuracy) / n);
    } else {
      row.value = static_cast<double>(ad.distinct_correct);
    }
  } else if (metric == "hist_l1") {
    std::vector<Seq> samples;
    for (const auto& r : recs)
      if (r.is_leaf)
        samples.push_back(r.terminal);
    std::vector<Seq> ref;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Rng rng = Rng::stream(derive_seed(cfg.seed, 0x68697374u), i);
      ref.push_back(draw_from(ctx.target(), rng));
    }
    row.value = position_histogram_error(samples, ref, dyck_open_positions);
    row.n = static_cast<long>(samples.size());
  } else if (metric == "nonleaf_fraction") {
    row.value = nonleaf_fraction(recs);
  } else {
    std::vector<double> xs;
    for (const auto& r : recs)
      xs.push_back(static_cast<double>(metric == "restarts_mean" ? r.restart_count : r.step_count));
    const Summary s = summarize(xs);
    if (metric == "steps_p50") {
      row.value = s.p50;
    } else {
      row.value = s.mean;
      row.stderr_ = s.stderr_;
    }
  }
}

} // namespace

std::vector<CsvRow> run_experiment(const ExperimentConfig& cfg) {
  std::vector<CsvRow> rows;
  for (const ExperimentPoint& p : expand_points(cfg)) {
    CsvRow base;
    base.task = p.task["name"].get<std::string>();
    base.algorithm = p.sampler["name"].get<std::string>();
    base.oracle = p.oracle["name"].get<std::string>();
    base.seed = cfg.seed;
    base.H = horizon_of(p.task);
    base.params_json = Json{{"task", p.task}, {"oracle", p.oracle}, {"sampler", p.sampler}}.dump();

    std::optional<TaskInstance> task;
    ValueOracle oracle;
    Sampler sampler;
    try {
      task = build_task(p.task);
      oracle = build_oracle(*task, p.oracle);
      sampler = build_sampler(*task, oracle, p.sampler);
    } catch (const std::exception& e) {
      CsvRow r = base;
      r.metric = "error";
      r.value = kNaN;
      r.notes = e.what();
      rows.push_back(std::move(r));
      continue;
    }

    PointOutcome out = run_replicates(sampler, cfg.replicates, cfg.seed, cfg.jobs);
    if (out.failed > 0) {
      CsvRow r = base;
      r.metric = "failed_replicates";
      r.value = static_cast<double>(out.failed);
      r.n = cfg.replicates;
      r.notes = out.first_error;
      rows.push_back(std::move(r));
    }
    PointContext ctx(*task, oracle);
    for (const auto& m : cfg.metrics) {
      CsvRow r = base;
      r.metric = m;
      if (out.records.empty()) {
        r.value = kNaN;
        r.notes = "no successful replicates";
      } else {
        try {
          metric_value(m, *task, ctx, out.records, cfg, r);
        } catch (const std::exception& e) {
          r.value = kNaN;
          r.notes = e.what();
        }
      }
      rows.push_back(std::move(r));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
    return std::tie(a.task, a.algorithm, a.oracle, a.params_json, a.metric) <
           std::tie(b.task, b.algorithm, b.oracle, b.params_json, b.metric);
  });
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<CsvRow> analyze(const TaskInstance& task, const ValueOracle& oracle,
                            const std::string& oracle_name) {
  const int H = task.H();
  const ExactChain chain = build_chain(*task.model, oracle);
  const std::vector<double> mu = stationary(chain);
  const TargetDist target = task.target();
  ProfileOptions po;
  po.prune_zero_subtrees = true;
  const ErrorProfile prof = error_profile(*task.model, oracle, task.exact->oracle(), target, po);
  const double k = prof.kappa_sup;
  const double kl = prof.kappa_leaf;

  CsvRow base;
  base.task = task.name;
  base.algorithm = "analyze";
  base.oracle = oracle_name;
  base.H = H;
  Json params = Json::object();
  for (const auto& [key, v] : task.params)
    params[key] = v;
  base.params_json = params.dump();
  base.n = static_cast<long>(chain.size());

  std::vector<CsvRow> rows;
  auto upper = [&](const std::string& metric, double value, double bound) {
    CsvRow r = base;
    r.metric = metric;
    r.value = value;
    r.notes = std::string(value <= bound ? "pass" : "fail") + ";bound<=" + format_double(bound) +
              ";margin=" + format_double(bound - value);
    rows.push_back(std::move(r));
  };
  auto lower = [&](const std::string& metric, double value, double bound) {
    CsvRow r = base;
    r.metric = metric;
    r.value = value;
    // Some lower bounds hold with equality for exact oracles.
    const bool ok = value >= bound * (1.0 - 1e-12);
    r.notes = std::string(ok ? "pass" : "fail") + ";bound>=" + format_double(bound) +
              ";margin=" + format_double(value - bound);
    rows.push_back(std::move(r));
  };
  auto info = [&](const std::string& metric, double value) {
    CsvRow r = base;
    r.metric = metric;
    r.value = value;
    r.notes = "info";
    rows.push_back(std::move(r));
  };

  upper("detailed_balance", detailed_balance_violation(chain, mu), 1e-12);
  upper("stationarity_residual", stationarity_residual(chain, mu), 1e-10);
  lower("mu_leaves", leaf_mass(chain, mu), 1.0 / (2.0 * k * kl * H));
  lower("mu_root", mu[0], 1.0 / (2.0 * k * k * H));
  lower("conductance", conductance(chain, mu, CutMode::subtree_cuts).phi, 1.0 / (4.0 * k * k * H));
  upper("leaf_law_linf", linf(leaf_conditional(chain, mu), ideal_leaf_dist(chain)), 1e-10);
  info("kappa", k);
  info("kappa_leaf", kl);
  return rows;
}

} // namespace vgb
