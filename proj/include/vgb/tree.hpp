#pragma once

// Generation tree: prefixes of action indices, the base-model contract, the
// tilt, and exact tilted targets for instances small enough to enumerate.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vgb/rng.hpp"

namespace vgb {

/// A node of the generation tree. The empty sequence is the root.
using Seq = std::vector<int>;

/// Ordered table over sequences. Ordered so that iteration (and anything
/// written from it) is deterministic.
using SeqDist = std::map<Seq, double>;

struct SeqHash {
  std::size_t operator()(const Seq& s) const noexcept;
};

inline constexpr std::size_t kDefaultEnumerationCap = 200000;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Numerically stable log(sum(exp(x))). Returns -inf for empty or all -inf.
double log_sum_exp(const std::vector<double>& xs);

/// Conditional next-action distributions over a fixed horizon.
class BaseModel {
public:
  virtual ~BaseModel() = default;

  virtual int alphabet_size() const = 0;
  virtual int horizon() const = 0;

  /// Writes pi_ref(. | prefix) into probs (resized to |A|). prefix depth < H.
  virtual void conditional(const Seq& prefix, std::vector<double>& probs) const = 0;

  /// Draw one action from pi_ref(. | prefix). The default inverts the CDF of
  /// conditional(); models with a cheaper native sampler may override.
  virtual int sample(const Seq& prefix, Rng& rng) const;

  std::vector<double> conditional(const Seq& prefix) const;
};

/// pi_ref uniform over the alphabet at every position.
class UniformModel : public BaseModel {
public:
  UniformModel(int alphabet, int horizon);
  int alphabet_size() const override { return alphabet_; }
  int horizon() const override { return horizon_; }
  void conditional(const Seq& prefix, std::vector<double>& probs) const override;
  int sample(const Seq& prefix, Rng& rng) const override;

private:
  int alphabet_;
  int horizon_;
};

/// Wraps an arbitrary conditional function; handy in tests.
class FunctionModel : public BaseModel {
public:
  using Fn = std::function<void(const Seq&, std::vector<double>&)>;
  FunctionModel(int alphabet, int horizon, Fn fn);
  int alphabet_size() const override { return alphabet_; }
  int horizon() const override { return horizon_; }
  void conditional(const Seq& prefix, std::vector<double>& probs) const override;

private:
  int alphabet_;
  int horizon_;
  Fn fn_;
};

/// Sequence-level tilt tau >= 0, optionally in reward form tau = exp(r / beta).
struct TiltSpec {
  std::function<double(const Seq&)> tau;
  /// Present only in reward form.
  std::function<double(const Seq&)> reward;
  double beta = 0.0;
  double r_max = 1.0;
  /// tau takes values in {0, 1}.
  bool binary = false;

  double operator()(const Seq& leaf) const { return tau(leaf); }
  double log_tau(const Seq& leaf) const;
  bool has_reward() const { return static_cast<bool>(reward); }

  static TiltSpec indicator(std::function<bool(const Seq&)> accept);
  static TiltSpec from_reward(std::function<double(const Seq&)> r, double beta,
                              double r_max);
  static TiltSpec constant_one();
};

/// Exact pi*(y) = pi_ref(y) tau(y) / V*(root) over leaves with positive mass.
struct TargetDist {
  SeqDist prob;
  double normalizer = 0.0;     ///< V*_tilt(root)
  double log_normalizer = kNegInf;

  double at(const Seq& leaf) const;
};

/// Parent first (absent at the root), then children in action order (absent
/// at leaves).
std::vector<Seq> neighborhood(const Seq& seq, int alphabet, int H);
std::vector<Seq> neighborhood(const BaseModel& model, const Seq& seq);

/// Sum of log conditionals along the path; 0 at the root, -inf on a zero step.
double path_log_density(const BaseModel& model, const Seq& seq);

/// Unweighted neighbourhood distribution: parent 1/2 and children pi_ref/2 at
/// internal nodes; pi_ref at the root; the parent with mass 1 at a leaf.
/// Entries follow neighborhood() order.
std::vector<std::pair<Seq, double>> q_ref(const BaseModel& model, const Seq& seq);

/// Depth-first walk over nodes reachable through positive pi_ref steps.
/// visit(seq, log_pi) returns whether to descend into the node's children.
/// Throws EnumerationCapExceeded once more than `cap` nodes are visited.
void for_each_node(const BaseModel& model,
                   const std::function<bool(const Seq&, double)>& visit,
                   std::size_t cap = std::numeric_limits<std::size_t>::max());

/// Enumerates every leaf in the support of pi_ref. `cap` bounds the number of
/// leaves visited.
TargetDist exact_target(const BaseModel& model, const TiltSpec& tilt,
                        std::size_t cap = kDefaultEnumerationCap);

/// Same target, but skips subtrees where prune(seq) is true. Only sound when
/// prune marks nodes whose every completion has tau = 0 (e.g. V* = 0).
TargetDist exact_target(const BaseModel& model, const TiltSpec& tilt,
                        const std::function<bool(const Seq&)>& prune,
                        std::size_t cap = kDefaultEnumerationCap);

/// Prefix marginal of a leaf law at depth h: sums leaf mass by y_{1:h}.
SeqDist prefix_marginal(const SeqDist& leaves, int h);

std::string to_string(const Seq& seq, const std::vector<std::string>& symbols = {});

} // namespace vgb
