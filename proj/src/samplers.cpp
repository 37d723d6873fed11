#include "vgb/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace vgb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// exp(lw - max) in place; returns false when every entry is -inf.
bool normalise_log_weights(std::vector<double>& w) {
  double m = kNegInf;
  for (double x : w)
    m = std::max(m, x);
  if (m == kNegInf) {
    std::fill(w.begin(), w.end(), 0.0);
    return false;
  }
  double s = 0.0;
  for (double& x : w) {
    x = (x == kNegInf) ? 0.0 : std::exp(x - m);
    s += x;
  }
  for (double& x : w)
    x /= s;
  return true;
}

/// Log weights of the non-lazy move law; see vgb_move_law.
void move_log_weights(const BaseModel& model, const ValueOracle& oracle, Seq& seq,
                      std::vector<double>& lw, std::vector<double>& probs) {
  const int A = model.alphabet_size();
  const int H = model.horizon();
  const int h = static_cast<int>(seq.size());
  lw.assign(static_cast<std::size_t>(A) + 1, kNegInf);
  if (h > 0)
    lw[0] = oracle.log_value(seq);
  if (h < H) {
    model.conditional(seq, probs);
    for (int a = 0; a < A; ++a) {
      const double p = probs[static_cast<std::size_t>(a)];
      if (!(p > 0.0))
        continue;
      seq.push_back(a);
      lw[static_cast<std::size_t>(a) + 1] = std::log(p) + oracle.log_value(seq);
      seq.pop_back();
    }
  }
}

void apply_move(Seq& seq, int move) {
  if (move == 0)
    seq.pop_back();
  else
    seq.push_back(move - 1);
}

} // namespace

long rejection_budget(double M, double delta) {
  return static_cast<long>(std::ceil(4.0 * M * std::log(4.0 / delta)));
}

Seq sample_path(const BaseModel& model, Rng& rng, Seq prefix) {
  const auto H = static_cast<std::size_t>(model.horizon());
  prefix.reserve(H);
  while (prefix.size() < H)
    prefix.push_back(model.sample(prefix, rng));
  return prefix;
}

// ---------------------------------------------------------------------------

RunRecord outcome_level_rs(const BaseModel& model, const TiltSpec& tilt,
                           const OutcomeRsConfig& cfg, Rng& rng) {
  const auto t0 = Clock::now();
  const int H = model.horizon();
  RunRecord rec;
  rec.seed = rng.seed();
  if (tilt.binary && cfg.binary_fast_path) {
    for (long draws = 1; draws <= cfg.max_draws; ++draws) {
      Seq y = sample_path(model, rng);
      ++rec.queries;
      if (tilt(y) > 0.0) {
        rec.terminal = std::move(y);
        rec.is_leaf = true;
        rec.step_count = static_cast<long>(H) * draws;
        rec.restart_count = draws - 1;
        rec.wallclock = seconds_since(t0);
        return rec;
      }
    }
    throw SamplerStuck("outcome_level_rs: no reward-1 draw within max_draws");
  }
  auto draw = [&](Rng& r) { return sample_path(model, r); };
  auto g = [&](const Seq& y) { return tilt(y); };
  auto res = rejection_sampling(draw, g, cfg.M, cfg.eps, rng);
  rec.terminal = std::move(res.value);
  rec.is_leaf = true;
  rec.step_count = static_cast<long>(H) * res.base_draws;
  rec.queries = res.queries;
  rec.wallclock = seconds_since(t0);
  return rec;
}

std::vector<double> alrs_step_law(const BaseModel& model, const ValueOracle& oracle,
                                  const Seq& prefix) {
  const int A = model.alphabet_size();
  std::vector<double> probs, lw(static_cast<std::size_t>(A), kNegInf);
  model.conditional(prefix, probs);
  Seq s = prefix;
  for (int a = 0; a < A; ++a) {
    const double p = probs[static_cast<std::size_t>(a)];
    if (!(p > 0.0))
      continue;
    s.push_back(a);
    lw[static_cast<std::size_t>(a)] = std::log(p) + oracle.log_value(s);
    s.pop_back();
  }
  if (!normalise_log_weights(lw))
    return {};
  return lw;
}

RunRecord action_level_rs(const BaseModel& model, const ValueOracle& oracle,
                          const AlrsConfig& cfg, Rng& rng) {
  const auto t0 = Clock::now();
  const int H = model.horizon();
  RunRecord rec;
  rec.seed = rng.seed();
  Seq y;
  y.reserve(static_cast<std::size_t>(H));
  std::vector<double> probs;
  const double step_delta = cfg.eps / static_cast<double>(H);
  while (static_cast<int>(y.size()) < H) {
    int a = -1;
    if (cfg.mode == AlrsMode::enumerate) {
      const std::vector<double> law = alrs_step_law(model, oracle, y);
      rec.queries += model.alphabet_size();
      if (!law.empty())
        a = rng.categorical(law);
    } else {
      auto draw = [&](Rng& r) { return model.sample(y, r); };
      Seq child = y;
      child.push_back(0);
      auto g = [&](int act) {
        child.back() = act;
        return oracle.value(child);
      };
      try {
        auto res = rejection_sampling(draw, g, cfg.M, step_delta, rng);
        rec.queries += res.queries;
        a = res.value;
        child.back() = a;
        if (!(oracle.value(child) > 0.0))
          a = -1;
      } catch (const DegenerateTarget&) {
        a = -1;
      }
    }
    ++rec.step_count;
    if (a < 0) {
      if (!cfg.restart_on_stuck)
        throw SamplerStuck("sampler stuck: every continuation of the prefix has value zero");
      if (++rec.restart_count > cfg.max_restarts)
        throw SamplerStuck("action_level_rs: restart budget exhausted");
      y.clear();
      continue;
    }
    y.push_back(a);
  }
  rec.terminal = std::move(y);
  rec.is_leaf = true;
  rec.wallclock = seconds_since(t0);
  return rec;
}

LeafLaw alrs_law(const BaseModel& model, const ValueOracle& oracle, bool restart,
                 std::size_t cap) {
  const int H = model.horizon();
  LeafLaw out;
  std::size_t count = 0;
  Seq y;
  std::function<void(double)> rec = [&](double mass) {
    if (++count > cap)
      throw EnumerationCapExceeded("alrs_law: tree exceeds cap");
    if (static_cast<int>(y.size()) == H) {
      out.prob[y] += mass;
      return;
    }
    const std::vector<double> law = alrs_step_law(model, oracle, y);
    if (law.empty()) {
      out.stuck_mass += mass;
      return;
    }
    for (std::size_t a = 0; a < law.size(); ++a) {
      if (!(law[a] > 0.0))
        continue;
      y.push_back(static_cast<int>(a));
      rec(mass * law[a]);
      y.pop_back();
    }
  };
  rec(1.0);
  if (restart) {
    const double ok = 1.0 - out.stuck_mass;
    if (!(ok > 0.0))
      throw DegenerateTarget("alrs_law: every path gets stuck");
    for (auto& [s, p] : out.prob)
      p /= ok;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> vgb_move_law(const BaseModel& model, const ValueOracle& oracle,
                                 const Seq& seq) {
  if (static_cast<int>(seq.size()) > model.horizon())
    throw ContractViolation("vgb_move_law: depth exceeds horizon");
  Seq s = seq;
  std::vector<double> lw, probs;
  move_log_weights(model, oracle, s, lw, probs);
  if (!normalise_log_weights(lw))
    throw IsolatedNode("isolated node: every neighbour has weight zero");
  return lw;
}

WalkState vgb_step(const WalkState& state, const BaseModel& model, const ValueOracle& oracle,
                   bool lazy, Rng& rng) {
  WalkState next = state;
  ++next.t;
  if (lazy && rng.bernoulli(0.5))
    return next;
  const std::vector<double> law = vgb_move_law(model, oracle, state.current);
  apply_move(next.current, rng.categorical(law));
  return next;
}

RunRecord vgb_run(const BaseModel& model, const ValueOracle& oracle, long T, ReturnMode mode,
                  Rng& rng) {
  if (T < 1)
    throw ContractViolation("vgb_run: T must be >= 1");
  const auto t0 = Clock::now();
  const int H = model.horizon();
  RunRecord rec;
  rec.seed = rng.seed();
  const long pick = (mode == ReturnMode::uniform_time)
                        ? 1 + static_cast<long>(rng.index(static_cast<std::size_t>(T)))
                        : T;
  Seq y;
  std::vector<double> lw, probs;
  for (long t = 1; t <= T; ++t) {
    if (!rng.bernoulli(0.5)) {
      move_log_weights(model, oracle, y, lw, probs);
      rec.queries += static_cast<long>(lw.size());
      if (!normalise_log_weights(lw))
        throw IsolatedNode("isolated node: every neighbour has weight zero");
      apply_move(y, rng.categorical(lw));
    }
    if (t == pick) {
      rec.terminal = y;
      if (mode == ReturnMode::uniform_time)
        break;
    }
  }
  rec.step_count = T;
  rec.is_leaf = static_cast<int>(rec.terminal.size()) == H;
  rec.wallclock = seconds_since(t0);
  return rec;
}

RunRecord vgb_first_leaf(const BaseModel& model, const ValueOracle& oracle,
                         const FirstLeafConfig& cfg, Rng& rng) {
  const int H = model.horizon();
  if (cfg.step_cap < H)
    throw ContractViolation("vgb_first_leaf: step_cap must be >= H");
  if (cfg.mode == FirstLeafMode::k_candidates && cfg.K < 1)
    throw ContractViolation("vgb_first_leaf: K must be >= 1");
  const auto t0 = Clock::now();
  RunRecord rec;
  rec.seed = rng.seed();
  Seq y;
  y.reserve(static_cast<std::size_t>(H));
  std::vector<double> lw, probs;
  std::vector<int> cand;
  while (static_cast<int>(y.size()) < H) {
    if (rec.step_count >= cfg.step_cap) {
      rec.timeout = true;
      break;
    }
    ++rec.step_count;
    if (cfg.mode == FirstLeafMode::enumerate) {
      move_log_weights(model, oracle, y, lw, probs);
      rec.queries += static_cast<long>(lw.size());
      if (!normalise_log_weights(lw))
        throw IsolatedNode("isolated node: every neighbour has weight zero");
      apply_move(y, rng.categorical(lw));
      continue;
    }
    // K sampled children against the parent weighted K * V(current).
    const int K = cfg.K;
    lw.assign(static_cast<std::size_t>(K) + 1, kNegInf);
    cand.assign(static_cast<std::size_t>(K), 0);
    if (!y.empty())
      lw[0] = std::log(static_cast<double>(K)) + oracle.log_value(y);
    for (int i = 0; i < K; ++i) {
      const int a = model.sample(y, rng);
      cand[static_cast<std::size_t>(i)] = a;
      y.push_back(a);
      lw[static_cast<std::size_t>(i) + 1] = oracle.log_value(y);
      y.pop_back();
    }
    rec.queries += K + 1;
    if (!normalise_log_weights(lw))
      continue; // every candidate scored zero: stay and redraw
    const int pick = rng.categorical(lw);
    if (pick == 0)
      y.pop_back();
    else
      y.push_back(cand[static_cast<std::size_t>(pick) - 1]);
  }
  rec.terminal = y;
  rec.is_leaf = static_cast<int>(y.size()) == H;
  rec.wallclock = seconds_since(t0);
  return rec;
}

RsHyper large_alphabet_defaults(double c_act, double eps_v, double delta, int H, long T) {
  const double k = 1.0 + eps_v;
  return {4.0 * c_act * k * k, delta / (16.0 * k * static_cast<double>(H) * static_cast<double>(T))};
}

Seq vgb_large_alphabet_move(const BaseModel& model, const ValueOracle& oracle, const Seq& seq,
                            double M, double delta_rej, Rng& rng, long* queries) {
  const int H = model.horizon();
  const int h = static_cast<int>(seq.size());
  // Moves are encoded as in vgb_move_law: 0 = parent, 1 + a = child a.
  auto draw = [&](Rng& r) -> int {
    if (h == H || (h > 0 && r.bernoulli(0.5)))
      return 0;
    return 1 + model.sample(seq, r);
  };
  const double up = h > 0 ? oracle.value(seq) : 0.0;
  Seq child = seq;
  child.push_back(0);
  auto g = [&](int move) {
    if (move == 0)
      return up;
    child.back() = move - 1;
    return oracle.value(child);
  };
  auto res = rejection_sampling(draw, g, M, delta_rej, rng);
  if (queries)
    *queries += res.queries;
  Seq next = seq;
  apply_move(next, res.value);
  return next;
}

RunRecord vgb_large_alphabet_exact(const BaseModel& model, const ValueOracle& oracle, long T,
                                   double M, double delta_rej, Rng& rng) {
  if (T < 1)
    throw ContractViolation("vgb_large_alphabet_exact: T must be >= 1");
  const auto t0 = Clock::now();
  RunRecord rec;
  rec.seed = rng.seed();
  Seq y;
  for (long t = 0; t < T; ++t) {
    if (rng.bernoulli(0.5))
      continue;
    y = vgb_large_alphabet_move(model, oracle, y, M, delta_rej, rng, &rec.queries);
  }
  rec.terminal = y;
  rec.step_count = T;
  rec.is_leaf = static_cast<int>(y.size()) == model.horizon();
  rec.wallclock = seconds_since(t0);
  return rec;
}

RunRecord vgb_momentum(const BaseModel& model, const ValueOracle& oracle, long step_cap,
                       Rng& rng) {
  // State (node, direction). With U = V(node) (flow to the parent) and
  // D = sum_a pi_ref(a|node) V(node a) (flow to the children), the down copy
  // moves to child a with weight pi_ref(a|.) V(node a) and flips with weight
  // max(0, U - D); the up copy moves to the parent with weight U and flips with
  // weight max(0, D - U). Each copy carries half of mu, so the projection keeps
  // the reversible walk's stationary law; self loops of the lifted chain do
  // not change the state and are skipped.
  const int H = model.horizon();
  if (step_cap < H)
    throw ContractViolation("vgb_momentum: step_cap must be >= H");
  const auto t0 = Clock::now();
  RunRecord rec;
  rec.seed = rng.seed();
  WalkState st;
  std::vector<double> lw, probs, w(static_cast<std::size_t>(model.alphabet_size()) + 2);
  while (static_cast<int>(st.current.size()) < H) {
    if (rec.step_count >= step_cap) {
      rec.timeout = true;
      break;
    }
    ++rec.step_count;
    move_log_weights(model, oracle, st.current, lw, probs);
    rec.queries += static_cast<long>(lw.size());
    // Rescale by the largest log weight before leaving log space.
    double m = kNegInf;
    for (double x : lw)
      m = std::max(m, x);
    if (m == kNegInf)
      throw IsolatedNode("isolated node: every neighbour has weight zero");
    const double up = lw[0] == kNegInf ? 0.0 : std::exp(lw[0] - m);
    double down = 0.0;
    for (std::size_t i = 1; i < lw.size(); ++i)
      down += lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - m);
    std::fill(w.begin(), w.end(), 0.0);
    // w[0] parent, w[1+a] child a, w.back() direction flip.
    if (st.direction > 0) {
      for (std::size_t i = 1; i < lw.size(); ++i)
        w[i] = lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - m);
      w.back() = std::max(0.0, up - down);
    } else {
      w[0] = up;
      w.back() = std::max(0.0, down - up);
    }
    const int pick = rng.categorical(w);
    if (pick < 0)
      throw IsolatedNode("isolated node: lifted walk has no move");
    if (pick == static_cast<int>(w.size()) - 1)
      st.direction = -st.direction;
    else
      apply_move(st.current, pick);
    ++st.t;
  }
  rec.terminal = st.current;
  rec.is_leaf = static_cast<int>(st.current.size()) == H;
  rec.wallclock = seconds_since(t0);
  return rec;
}

// ---------------------------------------------------------------------------

namespace {
RunRecord block_sampler(const BaseModel& model, const ValueOracle& oracle, const BlockConfig& cfg,
                        Rng& rng, bool proportional) {
  if (cfg.B < 1 || cfg.L < 1)
    throw ContractViolation("block sampler: B and L must be >= 1");
  const auto t0 = Clock::now();
  const int H = model.horizon();
  RunRecord rec;
  rec.seed = rng.seed();
  Seq y;
  std::vector<Seq> cands(static_cast<std::size_t>(cfg.B));
  std::vector<double> lw(static_cast<std::size_t>(cfg.B));
  while (static_cast<int>(y.size()) < H) {
    const int len = std::min(cfg.L, H - static_cast<int>(y.size()));
    for (int b = 0; b < cfg.B; ++b) {
      Seq& c = cands[static_cast<std::size_t>(b)];
      c = y;
      for (int i = 0; i < len; ++i)
        c.push_back(model.sample(c, rng));
      lw[static_cast<std::size_t>(b)] = oracle.log_value(c);
    }
    rec.queries += cfg.B;
    rec.step_count += static_cast<long>(cfg.B) * len;
    int pick = 0;
    if (proportional) {
      std::vector<double> w = lw;
      if (normalise_log_weights(w))
        pick = rng.categorical(w);
      else
        pick = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.B)));
    } else {
      for (int b = 1; b < cfg.B; ++b)
        if (lw[static_cast<std::size_t>(b)] > lw[static_cast<std::size_t>(pick)])
          pick = b;
    }
    y = cands[static_cast<std::size_t>(pick)];
  }
  rec.terminal = std::move(y);
  rec.is_leaf = true;
  rec.wallclock = seconds_since(t0);
  return rec;
}
} // namespace

RunRecord block_bon(const BaseModel& model, const ValueOracle& oracle, const BlockConfig& cfg,
                    Rng& rng) {
  return block_sampler(model, oracle, cfg, rng, false);
}

RunRecord block_rs(const BaseModel& model, const ValueOracle& oracle, const BlockConfig& cfg,
                   Rng& rng) {
  return block_sampler(model, oracle, cfg, rng, true);
}

int best_of_n_count(double F, double delta) {
  if (!(F > 0.0) || !(delta > 0.0) || !(delta < 1.0))
    throw ContractViolation("best_of_n_count: need F > 0 and delta in (0, 1)");
  return static_cast<int>(std::ceil(F * std::log(1.0 / delta)));
}

RunRecord best_of_n(const BaseSampler& base, const std::function<double(const Seq&)>& reward,
                    int N, int H, Rng& rng) {
  if (N < 1)
    throw ContractViolation("best_of_n: N must be >= 1");
  const auto t0 = Clock::now();
  RunRecord best;
  best.seed = rng.seed();
  double best_r = kNegInf;
  bool found = false;
  long steps = 0, queries = 0;
  for (int i = 0; i < N; ++i) {
    RunRecord r = base(rng);
    steps += r.step_count;
    queries += r.queries;
    const bool leaf = static_cast<int>(r.terminal.size()) == H;
    const double score = leaf ? reward(r.terminal) : kNegInf;
    if (leaf && (!found || score > best_r)) {
      best_r = score;
      best = std::move(r);
      found = true;
    }
  }
  if (!found)
    throw SamplerStuck("no leaf candidate among the Best-of-N draws");
  best.seed = rng.seed();
  best.is_leaf = true;
  best.step_count = steps;
  best.queries = queries;
  best.restart_count = 0;
  best.wallclock = seconds_since(t0);
  return best;
}

RunRecord beam_search(const BaseModel& model, const ValueOracle& guidance, int W, Rng& rng) {
  if (W < 1)
    throw ContractViolation("beam_search: W must be >= 1");
  const auto t0 = Clock::now();
  const int H = model.horizon();
  struct Beam {
    Seq seq;
    double score;
  };
  auto better = [](const Beam& a, const Beam& b) {
    if (a.score != b.score)
      return a.score > b.score;
    return a.seq < b.seq;
  };
  RunRecord rec;
  rec.seed = rng.seed();
  std::vector<Beam> beams{{Seq{}, guidance.log_value(Seq{})}};
  std::vector<double> probs;
  for (int h = 0; h < H; ++h) {
    std::vector<Beam> next;
    for (const Beam& b : beams) {
      model.conditional(b.seq, probs);
      for (int a = 0; a < model.alphabet_size(); ++a) {
        if (!(probs[static_cast<std::size_t>(a)] > 0.0))
          continue;
        Seq s = b.seq;
        s.push_back(a);
        const double sc = guidance.log_value(s);
        next.push_back({std::move(s), sc});
      }
    }
    rec.queries += static_cast<long>(next.size());
    rec.step_count += static_cast<long>(next.size());
    const std::size_t keep = std::min(next.size(), static_cast<std::size_t>(W));
    std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(keep), next.end(), better);
    next.resize(keep);
    beams = std::move(next);
  }
  rec.terminal = beams.front().seq;
  rec.is_leaf = true;
  rec.wallclock = seconds_since(t0);
  return rec;
}

} // namespace vgb
