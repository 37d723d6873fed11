#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vgb/errors.hpp"
#include "vgb/harness.hpp"

using namespace vgb;

namespace {

std::string error_of(const std::string& json) {
  try {
    validate_config(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

std::string csv(const std::vector<CsvRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

} // namespace

TEST_CASE("minimal config is filled with defaults") {
  const auto cfg = validate_config(R"({"task": {"name": "abc"}, "sampler": {"name": "vgb"}})");
  CHECK(cfg.task["H"] == 4);
  CHECK(cfg.task["eps"].get<double>() == 0.3);
  CHECK(cfg.oracle["name"] == "perturbed");
  CHECK(cfg.oracle["true_leaves"] == false);
  CHECK(cfg.replicates == 100);
  CHECK(cfg.metrics == std::vector<std::string>{"tv", "kl", "accuracy", "steps_mean"});
  const double k = 1.3;
  const double T = 32.0 * std::pow(k, 4) * 16.0 * std::log(k * 4 / 1e-3);
  CHECK(cfg.sampler["T"].get<long>() == static_cast<long>(std::ceil(T)));
  CHECK(cfg.sampler["return"] == "last");
}

TEST_CASE("config errors name the offending path") {
  CHECK(starts_with(error_of(R"({"task": {"name": "abc"}, "sampler": {"name": "vgbx"}})"),
                    "sampler.name: unknown sampler 'vgbx'"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc"}, "sampler": {"name": "vgb"}, "replicates": 0})"),
                    "replicates: value 0 out of range"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc", "Hx": 3}, "sampler": {"name": "vgb"}})"),
                    "task.Hx: unknown key"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc"}, "sampler": {"name": "vgb"}, "extra": 1})"),
                    "extra: unknown key"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc", "eps": -1}, "sampler": {"name": "vgb"}})"),
                    "task.eps: value -1 out of range"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc"}, "oracle": {"name": "ansatz"}, "sampler": {"name": "vgb"}})"),
                    "oracle.name: unknown oracle 'ansatz'"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc"}, "sampler": {"name": "vgb"}, "metrics": ["hist_l1"]})"),
                    "metrics[0]: hist_l1"));
  CHECK(starts_with(error_of(R"({"sampler": {"name": "vgb"}})"), "task: missing"));
  CHECK(starts_with(error_of("{not json"), "config: malformed JSON"));
  CHECK(starts_with(error_of(R"({"task": {"name": "abc", "H": []}, "sampler": {"name": "vgb"}})"),
                    "task.H: empty grid"));
}

TEST_CASE("grid expansion") {
  const auto cfg = validate_config(
      R"({"task": {"name": "abc", "H": [2, 3], "eps": [0.1, 0.2, 0.5]}, "sampler": {"name": "vgb"}})");
  const auto pts = expand_points(cfg);
  REQUIRE(pts.size() == 6u);
  CHECK(pts[0].task["H"] == 2);
  CHECK(pts[0].task["eps"].get<double>() == 0.1);
  CHECK(pts[1].task["eps"].get<double>() == 0.2);
  CHECK(pts[3].task["H"] == 3);
  // Each point gets its own step count.
  CHECK(pts[0].sampler["T"].get<long>() < pts[5].sampler["T"].get<long>());
}

TEST_CASE("experiment output is reproducible and independent of jobs") {
  const std::string base =
      R"({"task": {"name": "abc", "H": 3}, "sampler": {"name": "vgb", "T": 60}, "replicates": 200,
          "seed": 9, "metrics": ["tv", "kl", "chi2", "cov_q", "kl_regret", "accuracy",
          "distinct_correct", "nonleaf_fraction", "steps_mean", "steps_p50", "restarts_mean"])";
  auto cfg1 = validate_config(base + R"(, "jobs": 1})");
  auto cfg4 = validate_config(base + R"(, "jobs": 4})");
  const auto a = csv(run_experiment(cfg1));
  CHECK(a == csv(run_experiment(cfg1)));
  CHECK(a == csv(run_experiment(cfg4)));

  auto two = validate_config(R"({"task": {"name": "delayed", "H": 3}, "sampler": {"name": "alrs"},
                                 "replicates": 2, "seed": 1})");
  CHECK(csv(run_experiment(two)) == csv(run_experiment(two)));

  auto other = cfg1;
  other.seed = 10;
  CHECK(a != csv(run_experiment(other)));
}

TEST_CASE("experiment rows") {
  auto cfg = validate_config(R"({"task": {"name": "abc", "H": 3, "eps": 0.0}, "oracle": {"name": "exact"},
                                 "sampler": {"name": "alrs"}, "replicates": 50, "metrics": ["accuracy", "tv"]})");
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 2u);
  CHECK(rows[0].metric == "accuracy");
  CHECK(rows[0].value == 1.0);
  CHECK(rows[0].H == 3);
  CHECK(rows[0].algorithm == "alrs");
  CHECK(rows[1].metric == "tv");
  CHECK(rows[1].n == 50);
}

TEST_CASE("construction failures become error rows") {
  auto cfg = validate_config(R"cfg({"task": {"name": "dyck", "H": 4, "prefix": ")"},
                                 "sampler": {"name": "base"}, "replicates": 5})cfg");
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 1u);
  CHECK(rows[0].metric == "error");
  CHECK(std::isnan(rows[0].value));
  CHECK(rows[0].notes.find("prefix") != std::string::npos);
}

TEST_CASE("analyze passes every structural check on abc") {
  const auto t = make_task("abc", {{"H", 4}, {"eps", 0.3}});
  const auto rows = analyze(t, t.oracle("perturbed"), "perturbed");
  int checks = 0;
  for (const auto& r : rows) {
    if (r.notes == "info")
      continue;
    ++checks;
    INFO(r.metric << " " << r.notes);
    CHECK(starts_with(r.notes, "pass;"));
  }
  CHECK(checks == 6);
}

TEST_CASE("csv formatting") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);

  CsvRow r;
  r.task = "abc";
  r.params_json = R"({"H":2})";
  r.metric = "tv";
  const auto out = csv({r});
  CHECK(starts_with(out, std::string(kCsvHeader) + "\n"));
  CHECK(out.find("\"{\"\"H\"\":2}\"") != std::string::npos);
}
