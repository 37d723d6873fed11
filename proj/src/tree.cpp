#include "vgb/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vgb/errors.hpp"

namespace vgb {

std::size_t SeqHash::operator()(const Seq& s) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ s.size();
  for (int a : s) {
    h ^= static_cast<std::uint64_t>(a) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

double log_sum_exp(const std::vector<double>& xs) {
  double m = kNegInf;
  for (double x : xs)
    m = std::max(m, x);
  if (m == kNegInf)
    return kNegInf;
  if (std::isinf(m))
    return m;
  double s = 0.0;
  for (double x : xs)
    s += std::exp(x - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// BaseModel

int BaseModel::sample(const Seq& prefix, Rng& rng) const {
  std::vector<double> probs;
  conditional(prefix, probs);
  const int a = rng.categorical(probs);
  if (a < 0)
    throw ContractViolation("BaseModel::sample: conditional has no mass");
  return a;
}

std::vector<double> BaseModel::conditional(const Seq& prefix) const {
  std::vector<double> probs;
  conditional(prefix, probs);
  return probs;
}

UniformModel::UniformModel(int alphabet, int horizon) : alphabet_(alphabet), horizon_(horizon) {
  if (alphabet < 1 || horizon < 1)
    throw ContractViolation("UniformModel: alphabet and horizon must be positive");
}

void UniformModel::conditional(const Seq&, std::vector<double>& probs) const {
  probs.assign(static_cast<std::size_t>(alphabet_), 1.0 / alphabet_);
}

int UniformModel::sample(const Seq&, Rng& rng) const {
  return static_cast<int>(rng.index(static_cast<std::size_t>(alphabet_)));
}

FunctionModel::FunctionModel(int alphabet, int horizon, Fn fn)
    : alphabet_(alphabet), horizon_(horizon), fn_(std::move(fn)) {}

void FunctionModel::conditional(const Seq& prefix, std::vector<double>& probs) const {
  probs.assign(static_cast<std::size_t>(alphabet_), 0.0);
  fn_(prefix, probs);
}

// ---------------------------------------------------------------------------
// TiltSpec

double TiltSpec::log_tau(const Seq& leaf) const {
  if (has_reward() && beta > 0.0)
    return reward(leaf) / beta;
  const double t = tau(leaf);
  return t > 0.0 ? std::log(t) : kNegInf;
}

TiltSpec TiltSpec::indicator(std::function<bool(const Seq&)> accept) {
  TiltSpec t;
  t.tau = [accept](const Seq& y) { return accept(y) ? 1.0 : 0.0; };
  t.binary = true;
  return t;
}

TiltSpec TiltSpec::from_reward(std::function<double(const Seq&)> r, double beta, double r_max) {
  if (!(beta > 0.0))
    throw ContractViolation("TiltSpec::from_reward: beta must be positive");
  TiltSpec t;
  t.reward = r;
  t.beta = beta;
  t.r_max = r_max;
  t.tau = [r, beta](const Seq& y) { return std::exp(r(y) / beta); };
  return t;
}

TiltSpec TiltSpec::constant_one() {
  TiltSpec t;
  t.tau = [](const Seq&) { return 1.0; };
  t.binary = true;
  return t;
}

double TargetDist::at(const Seq& leaf) const {
  auto it = prob.find(leaf);
  return it == prob.end() ? 0.0 : it->second;
}

// ---------------------------------------------------------------------------
// Tree plumbing

std::vector<Seq> neighborhood(const Seq& seq, int alphabet, int H) {
  const int h = static_cast<int>(seq.size());
  if (h > H)
    throw ContractViolation("neighborhood: depth exceeds horizon");
  std::vector<Seq> out;
  if (h > 0)
    out.emplace_back(seq.begin(), seq.end() - 1);
  if (h < H) {
    for (int a = 0; a < alphabet; ++a) {
      Seq child = seq;
      child.push_back(a);
      out.push_back(std::move(child));
    }
  }
  return out;
}

std::vector<Seq> neighborhood(const BaseModel& model, const Seq& seq) {
  return neighborhood(seq, model.alphabet_size(), model.horizon());
}

double path_log_density(const BaseModel& model, const Seq& seq) {
  if (static_cast<int>(seq.size()) > model.horizon())
    throw ContractViolation("path_log_density: depth exceeds horizon");
  double lp = 0.0;
  Seq prefix;
  prefix.reserve(seq.size());
  std::vector<double> probs;
  for (int a : seq) {
    model.conditional(prefix, probs);
    const double p = probs.at(static_cast<std::size_t>(a));
    if (!(p > 0.0))
      return kNegInf;
    lp += std::log(p);
    prefix.push_back(a);
  }
  return lp;
}

std::vector<std::pair<Seq, double>> q_ref(const BaseModel& model, const Seq& seq) {
  const int h = static_cast<int>(seq.size());
  const int H = model.horizon();
  if (h > H)
    throw ContractViolation("q_ref: depth exceeds horizon");
  std::vector<std::pair<Seq, double>> out;
  if (h == H) {
    out.emplace_back(Seq(seq.begin(), seq.end() - 1), 1.0);
    return out;
  }
  const double child_share = (h == 0) ? 1.0 : 0.5;
  if (h > 0)
    out.emplace_back(Seq(seq.begin(), seq.end() - 1), 0.5);
  std::vector<double> probs;
  model.conditional(seq, probs);
  for (int a = 0; a < model.alphabet_size(); ++a) {
    Seq child = seq;
    child.push_back(a);
    out.emplace_back(std::move(child), child_share * probs[static_cast<std::size_t>(a)]);
  }
  return out;
}

namespace {
void dfs(const BaseModel& model, Seq& seq, double log_pi,
         const std::function<bool(const Seq&, double)>& visit, std::size_t cap,
         std::size_t& count, std::vector<double>& scratch) {
  if (++count > cap)
    throw EnumerationCapExceeded("instance too large to enumerate (cap " +
                                 std::to_string(cap) + " nodes)");
  if (!visit(seq, log_pi))
    return;
  if (static_cast<int>(seq.size()) >= model.horizon())
    return;
  model.conditional(seq, scratch);
  const std::vector<double> probs = scratch;
  for (int a = 0; a < model.alphabet_size(); ++a) {
    const double p = probs[static_cast<std::size_t>(a)];
    if (!(p > 0.0))
      continue;
    seq.push_back(a);
    dfs(model, seq, log_pi + std::log(p), visit, cap, count, scratch);
    seq.pop_back();
  }
}

TargetDist build_target(const BaseModel& model, const TiltSpec& tilt,
                        const std::function<bool(const Seq&)>* prune, std::size_t cap) {
  const int H = model.horizon();
  std::vector<std::pair<Seq, double>> logw;
  std::size_t leaves = 0;
  for_each_node(model, [&](const Seq& s, double lp) {
    if (static_cast<int>(s.size()) == H) {
      if (++leaves > cap)
        throw EnumerationCapExceeded("instance too large to enumerate (cap " +
                                     std::to_string(cap) + " leaves)");
      const double lt = tilt.log_tau(s);
      if (lt != kNegInf)
        logw.emplace_back(s, lp + lt);
      return false;
    }
    return !(prune && (*prune)(s));
  });
  std::vector<double> xs;
  xs.reserve(logw.size());
  for (auto& [s, w] : logw)
    xs.push_back(w);
  const double lz = log_sum_exp(xs);
  if (lz == kNegInf)
    throw DegenerateTarget("degenerate target: tilt is zero on the support of pi_ref");
  TargetDist t;
  t.log_normalizer = lz;
  t.normalizer = std::exp(lz);
  for (auto& [s, w] : logw)
    t.prob.emplace(s, std::exp(w - lz));
  return t;
}
} // namespace

void for_each_node(const BaseModel& model,
                   const std::function<bool(const Seq&, double)>& visit, std::size_t cap) {
  Seq seq;
  seq.reserve(static_cast<std::size_t>(model.horizon()));
  std::size_t count = 0;
  std::vector<double> scratch;
  dfs(model, seq, 0.0, visit, cap, count, scratch);
}

TargetDist exact_target(const BaseModel& model, const TiltSpec& tilt, std::size_t cap) {
  return build_target(model, tilt, nullptr, cap);
}

TargetDist exact_target(const BaseModel& model, const TiltSpec& tilt,
                        const std::function<bool(const Seq&)>& prune, std::size_t cap) {
  return build_target(model, tilt, &prune, cap);
}

SeqDist prefix_marginal(const SeqDist& leaves, int h) {
  SeqDist out;
  for (const auto& [s, p] : leaves) {
    if (static_cast<int>(s.size()) < h)
      throw ContractViolation("prefix_marginal: sequence shorter than h");
    out[Seq(s.begin(), s.begin() + h)] += p;
  }
  return out;
}

std::string to_string(const Seq& seq, const std::vector<std::string>& symbols) {
  if (seq.empty())
    return "<root>";
  std::ostringstream os;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int a = seq[i];
    if (!symbols.empty() && a >= 0 && a < static_cast<int>(symbols.size())) {
      os << symbols[static_cast<std::size_t>(a)];
    } else {
      if (i)
        os << ' ';
      os << a;
    }
  }
  return os.str();
}

} // namespace vgb
