#pragma once

// Generation algorithms: the backtracking walk and its practical variants,
// rejection-sampling baselines, block baselines, beam search, Best-of-N.
// Every sampler is a pure function of its inputs and the Rng it is handed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vgb/errors.hpp"
#include "vgb/oracle.hpp"
#include "vgb/rng.hpp"
#include "vgb/tree.hpp"

namespace vgb {

struct RunRecord {
  Seq terminal;
  bool is_leaf = false;
  long step_count = 0;
  long restart_count = 0;
  std::uint64_t seed = 0;
  double wallclock = 0.0; ///< seconds
  bool timeout = false;
  long queries = 0; ///< value/tilt evaluations, where tracked
};

struct WalkState {
  Seq current;
  long t = 0;
  /// +1 moving away from the root, -1 towards it (momentum walk only).
  int direction = +1;
};

// ---------------------------------------------------------------------------
// Rejection sampling with an estimated normaliser

template <class T>
struct RsOutcome {
  T value;
  bool accepted = false;
  long base_draws = 0;
  long queries = 0;
  double z_hat = 0.0;
};

/// Number of draws N = ceil(4 M log(4 / delta)) used for both phases.
long rejection_budget(double M, double delta);

/// Estimate Z from N base draws, then run up to N accept/reject rounds with
/// acceptance min(g(z) / (Z M), 1); if none accept, return a raw base draw.
template <class Draw, class Tilt>
auto rejection_sampling(Draw&& draw, Tilt&& g, double M, double delta, Rng& rng)
    -> RsOutcome<decltype(draw(rng))> {
  using T = decltype(draw(rng));
  if (!(M > 0.0) || !(delta > 0.0) || !(delta < 1.0))
    throw ContractViolation("rejection_sampling: need M > 0 and delta in (0, 1)");
  const long N = rejection_budget(M, delta);
  RsOutcome<T> out{};
  double z_hat = 0.0;
  for (int attempt = 0; attempt < 2 && !(z_hat > 0.0); ++attempt) {
    double sum = 0.0;
    for (long i = 0; i < N; ++i) {
      sum += g(draw(rng));
      ++out.base_draws;
      ++out.queries;
    }
    z_hat = sum / static_cast<double>(N);
  }
  if (!(z_hat > 0.0))
    throw DegenerateTarget("degenerate tilt: estimated normaliser is zero");
  out.z_hat = z_hat;
  for (long i = 0; i < N; ++i) {
    T z = draw(rng);
    ++out.base_draws;
    const double gz = g(z);
    ++out.queries;
    const double accept = std::min(gz / (z_hat * M), 1.0);
    if (rng.uniform() < accept) {
      out.value = std::move(z);
      out.accepted = true;
      return out;
    }
  }
  out.value = draw(rng);
  ++out.base_draws;
  return out;
}

/// Draw y_{h+1:H} from pi_ref after `prefix`.
Seq sample_path(const BaseModel& model, Rng& rng, Seq prefix = {});

// ---------------------------------------------------------------------------
// Outcome- and action-level rejection sampling

struct OutcomeRsConfig {
  double M = 1.0;
  double eps = 0.01;
  /// For binary tilts: draw until tau = 1 instead of running the estimator.
  bool binary_fast_path = true;
  long max_draws = 100000000;
};

RunRecord outcome_level_rs(const BaseModel& model, const TiltSpec& tilt,
                           const OutcomeRsConfig& cfg, Rng& rng);

enum class AlrsMode { enumerate, large_alphabet };

struct AlrsConfig {
  AlrsMode mode = AlrsMode::enumerate;
  double M = 4.0;   ///< large_alphabet only
  double eps = 0.01; ///< large_alphabet only; per-step delta = eps / H
  bool restart_on_stuck = false;
  long max_restarts = 100000000;
};

RunRecord action_level_rs(const BaseModel& model, const ValueOracle& oracle,
                          const AlrsConfig& cfg, Rng& rng);

/// Per-step law pi_ref(a|prefix) V(prefix a) / sum; empty when all zero.
std::vector<double> alrs_step_law(const BaseModel& model, const ValueOracle& oracle,
                                  const Seq& prefix);

struct LeafLaw {
  SeqDist prob;
  /// Probability of reaching an all-zero step (lost mass without restarts).
  double stuck_mass = 0.0;
};

/// Exact ALRS output law by composing per-step laws over the tree. With
/// `restart` the law is conditioned on not getting stuck.
LeafLaw alrs_law(const BaseModel& model, const ValueOracle& oracle, bool restart,
                 std::size_t cap = kDefaultEnumerationCap);

// ---------------------------------------------------------------------------
// Backtracking walk

/// Non-lazy move law at `seq`: index 0 is the parent (weight V(seq), zero at
/// the root), index 1 + a is child a (weight pi_ref(a|seq) V(seq a), zero at
/// leaves). Throws IsolatedNode when every weight is zero.
std::vector<double> vgb_move_law(const BaseModel& model, const ValueOracle& oracle,
                                 const Seq& seq);

WalkState vgb_step(const WalkState& state, const BaseModel& model, const ValueOracle& oracle,
                   bool lazy, Rng& rng);

enum class ReturnMode { last, uniform_time };

RunRecord vgb_run(const BaseModel& model, const ValueOracle& oracle, long T, ReturnMode mode,
                  Rng& rng);

enum class FirstLeafMode { enumerate, k_candidates };

struct FirstLeafConfig {
  FirstLeafMode mode = FirstLeafMode::enumerate;
  int K = 32;
  long step_cap = 1000000;
};

/// Non-lazy walk stopped at the first depth-H node.
RunRecord vgb_first_leaf(const BaseModel& model, const ValueOracle& oracle,
                         const FirstLeafConfig& cfg, Rng& rng);

struct RsHyper {
  double M;
  double delta_rej;
};

/// M = 4 C_act (1+eps_V)^2 and delta_rej = delta / (16 (1+eps_V) H T).
RsHyper large_alphabet_defaults(double c_act, double eps_v, double delta, int H, long T);

/// Lazy walk whose moves are drawn by rejection sampling against q_ref.
RunRecord vgb_large_alphabet_exact(const BaseModel& model, const ValueOracle& oracle, long T,
                                   double M, double delta_rej, Rng& rng);

/// One non-lazy move of the rejection-sampled walk (exposed for testing).
Seq vgb_large_alphabet_move(const BaseModel& model, const ValueOracle& oracle, const Seq& seq,
                            double M, double delta_rej, Rng& rng, long* queries = nullptr);

/// Lifted walk with direction-tagged copies of every node, stopped at the
/// first leaf. Only state-changing transitions are simulated.
RunRecord vgb_momentum(const BaseModel& model, const ValueOracle& oracle, long step_cap,
                       Rng& rng);

// ---------------------------------------------------------------------------
// Block baselines, Best-of-N, beam search

struct BlockConfig {
  int B = 4; ///< candidates per block
  int L = 1; ///< block length; the final block is truncated when L does not divide H
};

RunRecord block_bon(const BaseModel& model, const ValueOracle& oracle, const BlockConfig& cfg,
                    Rng& rng);
RunRecord block_rs(const BaseModel& model, const ValueOracle& oracle, const BlockConfig& cfg,
                   Rng& rng);

using BaseSampler = std::function<RunRecord(Rng&)>;

RunRecord best_of_n(const BaseSampler& base, const std::function<double(const Seq&)>& reward,
                    int N, int H, Rng& rng);

/// N = ceil(F log(1/delta)).
int best_of_n_count(double F, double delta);

RunRecord beam_search(const BaseModel& model, const ValueOracle& guidance, int W, Rng& rng);

} // namespace vgb
