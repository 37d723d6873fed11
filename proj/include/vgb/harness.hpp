#pragma once

// Experiment configuration, seeded replication and CSV output.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgb/samplers.hpp"
#include "vgb/tasks.hpp"

namespace vgb {

using Json = nlohmann::json;

/// Multiplier in the default step count T = c kappa^4 H^2 log(kappa H / 1e-3).
inline constexpr double kDefaultStepConstant = 32.0;

struct ExperimentConfig {
  /// Each section is a resolved JSON object; parameter values may be arrays,
  /// which expand into a grid of parameter points.
  Json task;
  Json oracle;
  Json sampler;
  long replicates = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> metrics;
  std::string output;
  int jobs = 1;
  double step_constant = kDefaultStepConstant;
  /// cov_q threshold is 48 H kappa^2 / coverage_delta.
  double coverage_delta = 0.3;
};

/// Parses, fills defaults and validates. Errors are ConfigError with a
/// message starting with the offending path, e.g. "sampler.name: ...".
ExperimentConfig validate_config(const std::string& json_text);

/// One resolved parameter point of a grid.
struct ExperimentPoint {
  Json task;
  Json oracle;
  Json sampler;
};

std::vector<ExperimentPoint> expand_points(const ExperimentConfig& cfg);

struct CsvRow {
  std::string task;
  std::string algorithm;
  std::string oracle;
  std::uint64_t seed = 0;
  int H = 0;
  std::string params_json;
  std::string metric;
  double value = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  long n = 0;
  std::string notes;
};

inline const char* kCsvHeader = "task,algorithm,oracle,seed,H,params_json,metric,value,stderr,n,notes";

/// 17 significant digits; nan and inf spelled out.
std::string format_double(double x);
std::string csv_escape(const std::string& s);
void write_csv(std::ostream& os, const std::vector<CsvRow>& rows);

/// Build the task of a resolved task section.
TaskInstance build_task(const Json& task);
/// Build (or train, or load) the oracle of a resolved oracle section.
ValueOracle build_oracle(const TaskInstance& task, const Json& oracle);

using Sampler = std::function<RunRecord(Rng&)>;
/// Sampler of a resolved sampler section bound to a task and oracle.
Sampler build_sampler(const TaskInstance& task, const ValueOracle& oracle, const Json& sampler);

/// Runs every replicate (up to cfg.jobs at a time) and aggregates metrics.
/// Replicate i uses Rng::stream(seed, i); output is independent of jobs.
std::vector<CsvRow> run_experiment(const ExperimentConfig& cfg);

/// Structural checks of the exact chain (reversibility, stationarity,
/// leaf/root mass, conductance, leaf law). One row per check; notes hold
/// "pass" or "fail" against the bound.
std::vector<CsvRow> analyze(const TaskInstance& task, const ValueOracle& oracle,
                            const std::string& oracle_name);

} // namespace vgb
