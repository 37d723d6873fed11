#pragma once

// Instance families: base model, tilt, named oracles and known closed forms.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vgb/oracle.hpp"
#include "vgb/tree.hpp"

namespace vgb {

struct Fact {
  double value = 0.0;
  std::string how; ///< "closed_form", "dynamic_program" or "enumeration"
};

struct TaskInstance {
  std::string name;
  std::map<std::string, double> params;
  std::shared_ptr<const BaseModel> model;
  TiltSpec tilt;
  /// r* on leaves (equals tau for indicator tilts).
  std::function<double(const Seq&)> reward;
  std::shared_ptr<const ExactValue> exact;
  std::map<std::string, ValueOracle> oracles;
  std::map<std::string, Fact> facts;
  std::vector<std::string> symbols;

  int H() const { return model->horizon(); }
  int A() const { return model->alphabet_size(); }
  /// Throws ConfigError for unknown names.
  const ValueOracle& oracle(const std::string& name) const;
  double fact(const std::string& name) const;
  /// Exact pi*, skipping subtrees where V* = 0.
  TargetDist target(std::size_t cap = kDefaultEnumerationCap) const;
};

/// Uniform over {a, b, c}^H, tau = [c not in y]. Oracles: exact, perturbed
/// (marked action a), geometric (alpha).
TaskInstance abc_task(int H, double eps_v, double alpha = 0.5);

/// TV between the exact ALRS law under the perturbed oracle and pi*, by a
/// dynamic program over the number of marked actions.
double abc_alrs_tv(int H, double eps_v);

/// Uniform bits, beta = 1/H, r = mean of the bits. Oracles: exact, delayed.
TaskInstance delayed_task(int H);

/// ABC base with r = [c not in y], tau = exp(r / beta) and
/// Q-hat = Q* + eps_q [y_h = a]. Oracles: exact, perturbed.
TaskInstance kl_abc_task(int H, double eps_q, double beta);

/// H = K M bits; every K-th bit is forced to the parity of the K-1 before it;
/// r = [every forced bit is 0]. Oracles: exact, ansatz.
TaskInstance parity_task(int K, int M);

/// log V for the parity task; `ansatz` replaces the parity indicator at
/// h = K-1 (mod K) with 1/2.
double parity_log_value(const Seq& y, int K, int M, bool ansatz);

struct DyckOptions {
  double p_square = 0.8;
  double lambda = 0.1;
  /// Prompt brackets, e.g. "(([". Only the four bracket characters.
  std::string prefix;
  double alpha = 0.5; ///< geometric oracle
};

/// Symbols ( ) [ ] B E P S. A response is valid when it contains only
/// brackets and closes the prompt's stack exactly at depth H.
TaskInstance dyck_task(int H, const DyckOptions& opts = {});

/// Positions (0-based) of opening brackets in a Dyck response.
std::vector<int> dyck_open_positions(const Seq& y);

/// Uniform bits, H even. r = 1 if y_1 = 0 and the second half is all 0,
/// r = 2^{1-H/2} if y_1 = 1, else 0. tau = r.
TaskInstance beam_cx_task(int H);

/// Names accepted by make_task.
const std::vector<std::string>& task_names();

/// Construct by name from a flat parameter table (H, eps, alpha, K, M, beta,
/// p_square, lambda). Unknown names throw ConfigError.
TaskInstance make_task(const std::string& name, const std::map<std::string, double>& params,
                       const std::string& prefix = {});

} // namespace vgb
