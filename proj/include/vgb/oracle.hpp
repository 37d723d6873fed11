#pragma once

// Value oracles: the exact value V*_tilt, the corrupted and heuristic
// variants used in the experiments, and error measurements against V*.

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "vgb/tree.hpp"

namespace vgb {

/// Nonnegative score on prefixes, carried as log V (with -inf for zero).
class ValueOracle {
public:
  using LogFn = std::function<double(const Seq&)>;

  ValueOracle() = default;
  ValueOracle(LogFn log_fn, bool exact_at_leaves, std::string name = {});

  static ValueOracle from_linear(std::function<double(const Seq&)> fn, bool exact_at_leaves,
                                 std::string name = {});

  double log_value(const Seq& seq) const { return log_fn_(seq); }
  double value(const Seq& seq) const;
  bool exact_at_leaves() const { return exact_at_leaves_; }
  const std::string& name() const { return name_; }
  explicit operator bool() const { return static_cast<bool>(log_fn_); }

private:
  LogFn log_fn_;
  bool exact_at_leaves_ = false;
  std::string name_;
};

/// Backward-recursion V*_tilt with a per-node memo. A task may register a
/// closed form, which then takes precedence over enumeration.
class ExactValue {
public:
  using ClosedForm = std::function<double(const Seq&)>; ///< returns log V*

  ExactValue(std::shared_ptr<const BaseModel> model, TiltSpec tilt,
             std::size_t cap = kDefaultEnumerationCap, ClosedForm closed_form = {});

  double log_value(const Seq& seq) const;
  double value(const Seq& seq) const;
  ValueOracle oracle() const;

  const BaseModel& model() const { return *model_; }
  const TiltSpec& tilt() const { return tilt_; }

private:
  double recurse(Seq& seq) const;

  std::shared_ptr<const BaseModel> model_;
  TiltSpec tilt_;
  std::size_t cap_;
  ClosedForm closed_form_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<Seq, double, SeqHash> memo_;
};

/// One-shot V*_tilt(seq) by enumeration below seq.
double exact_value(const BaseModel& model, const TiltSpec& tilt, const Seq& seq,
                   std::size_t cap = kDefaultEnumerationCap);

/// V-hat = (1+eps) V* when the last action is `marked` and 0 < h < H.
ValueOracle perturbed_oracle(const ValueOracle& exact, double eps, int marked, int H);

/// V-hat(y_{1:h}) = V*(y_{1:h-1}); the root keeps V*(root).
ValueOracle delayed_oracle(const ValueOracle& exact);

/// V-hat(y_{1:h}) = alpha^(H-h) * prefix_reward(y_{1:h}).
ValueOracle geometric_oracle(std::function<bool(const Seq&)> prefix_reward, double alpha, int H,
                             bool exact_at_leaves = true);

/// Replace leaf values with tau (the "true leaf rewards" switch).
ValueOracle with_true_leaves(const ValueOracle& oracle, const TiltSpec& tilt, int H);

/// Thread-safe memo in front of an expensive oracle (e.g. a trained net).
ValueOracle memoized(const ValueOracle& oracle);

/// Oracle implied by a per-step policy: V(y_{1:h}) = prod pi~(y_i|.)/pi_ref(y_i|.).
/// Bellman-consistent with respect to pi_ref by construction.
ValueOracle implicit_oracle(std::shared_ptr<const BaseModel> model,
                            std::function<void(const Seq&, std::vector<double>&)> policy);

/// Bellman-consistent oracle from arbitrary nonnegative leaf values:
/// V(y_{1:h}) = sum_{y_{h+1}} pi_ref(y_{h+1}|.) V(y_{1:h+1}). Tabulated eagerly.
ValueOracle consistent_oracle(const BaseModel& model,
                              const std::function<double(const Seq&)>& leaf_log_value,
                              std::size_t cap = kDefaultEnumerationCap);

struct ErrorProfile {
  double kappa_sup = 1.0;  ///< internal nodes, depths 1..H-1
  double kappa_leaf = 1.0; ///< depth H
  std::vector<double> avg_over;  ///< index h = 1..H: E_{pi*}[V-hat / V*]
  std::vector<double> avg_under; ///< index h = 1..H: E_{pi*}[V* / V-hat]
  /// Max of the per-depth averages (the average-case kappa).
  double kappa_avg() const;
};

struct ProfileOptions {
  std::size_t cap = kDefaultEnumerationCap;
  /// Skip subtrees below nodes where both values are zero.
  bool prune_zero_subtrees = false;
};

ErrorProfile error_profile(const BaseModel& model, const ValueOracle& oracle,
                           const ValueOracle& exact, const TargetDist& target,
                           const ProfileOptions& opts = {});

inline constexpr double kBellmanFloor = 1e-300;

/// max over depths 0..H-1 of |V(y) - sum pi_ref V(y,a)| / max(V(y), floor).
double bellman_defect(const BaseModel& model, const ValueOracle& oracle,
                      std::size_t cap = kDefaultEnumerationCap);

} // namespace vgb
