#include "vgb/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "vgb/errors.hpp"

namespace vgb {

const ValueOracle& TaskInstance::oracle(const std::string& oname) const {
  auto it = oracles.find(oname);
  if (it == oracles.end())
    throw ConfigError("task '" + name + "' has no oracle '" + oname + "'");
  return it->second;
}

double TaskInstance::fact(const std::string& fname) const {
  auto it = facts.find(fname);
  if (it == facts.end())
    throw ConfigError("task '" + name + "' has no registered fact '" + fname + "'");
  return it->second.value;
}

TargetDist TaskInstance::target(std::size_t cap) const {
  auto ex = exact;
  return exact_target(*model, tilt, [ex](const Seq& s) { return ex->log_value(s) == kNegInf; },
                      cap);
}

namespace {

bool contains(const Seq& y, int a) { return std::find(y.begin(), y.end(), a) != y.end(); }

void attach_exact(TaskInstance& t, ExactValue::ClosedForm cf) {
  t.exact = std::make_shared<const ExactValue>(t.model, t.tilt, kDefaultEnumerationCap,
                                               std::move(cf));
  t.oracles["exact"] = t.exact->oracle();
}

} // namespace

// ---------------------------------------------------------------------------

TaskInstance abc_task(int H, double eps_v, double alpha) {
  if (H < 1)
    throw ConfigError("abc: H must be >= 1");
  if (eps_v < 0.0)
    throw ConfigError("abc: eps must be >= 0");
  constexpr int kA = 0, kC = 2;
  TaskInstance t;
  t.name = "abc";
  t.params = {{"H", H}, {"eps", eps_v}, {"alpha", alpha}};
  t.model = std::make_shared<UniformModel>(3, H);
  t.tilt = TiltSpec::indicator([](const Seq& y) { return !contains(y, kC); });
  t.reward = t.tilt.tau;
  t.symbols = {"a", "b", "c"};
  const double l23 = std::log(2.0 / 3.0);
  attach_exact(t, [H, l23](const Seq& y) {
    if (contains(y, kC))
      return kNegInf;
    return l23 * static_cast<double>(H - static_cast<int>(y.size()));
  });
  t.oracles["perturbed"] = perturbed_oracle(t.oracles["exact"], eps_v, kA, H);
  t.oracles["geometric"] =
      geometric_oracle([](const Seq& y) { return !contains(y, kC); }, alpha, H, true);
  t.facts["v_root"] = {std::pow(2.0 / 3.0, H), "closed_form"};
  // Leaves are never perturbed, so at H = 1 the first step is exact.
  t.facts["alrs_marginal"] = {H == 1 ? 0.5 : (1.0 + eps_v) / (2.0 + eps_v), "closed_form"};
  t.facts["alrs_tv"] = {abc_alrs_tv(H, eps_v), "dynamic_program"};
  return t;
}

double abc_alrs_tv(int H, double eps_v) {
  // Positions 1..H-1 pick a with probability p; the last position is fair
  // because the perturbation leaves leaves untouched. pi* is uniform on
  // {a,b}^H, so TV reduces to a binomial comparison over H-1 coordinates.
  const int n = H - 1;
  if (n <= 0)
    return 0.0;
  const double p = (1.0 + eps_v) / (2.0 + eps_v);
  const double lp = std::log(p), lq = std::log1p(-p), lh = std::log(0.5);
  double tv = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    const double a = std::exp(lc + k * lp + (n - k) * lq);
    const double b = std::exp(lc + n * lh);
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

// ---------------------------------------------------------------------------

TaskInstance delayed_task(int H) {
  if (H < 1)
    throw ConfigError("delayed: H must be >= 1");
  TaskInstance t;
  t.name = "delayed";
  t.params = {{"H", H}};
  t.model = std::make_shared<UniformModel>(2, H);
  const double beta = 1.0 / H;
  auto r = [H](const Seq& y) {
    double s = 0.0;
    for (int b : y)
      s += b;
    return s / H;
  };
  t.tilt = TiltSpec::from_reward(r, beta, 1.0);
  t.reward = r;
  t.symbols = {"0", "1"};
  const double lhalf = std::log((1.0 + std::exp(1.0)) / 2.0);
  attach_exact(t, [H, lhalf](const Seq& y) {
    double s = 0.0;
    for (int b : y)
      s += b;
    return lhalf * static_cast<double>(H - static_cast<int>(y.size())) + s;
  });
  t.oracles["delayed"] = delayed_oracle(t.oracles["exact"]);
  t.facts["uniform_regret"] = {lhalf - 0.5, "closed_form"};
  t.facts["beta"] = {beta, "closed_form"};
  return t;
}

// ---------------------------------------------------------------------------

TaskInstance kl_abc_task(int H, double eps_q, double beta) {
  if (H < 1)
    throw ConfigError("kl_abc: H must be >= 1");
  if (eps_q < 0.0 || eps_q > 1.0)
    throw ConfigError("kl_abc: eps must lie in [0, 1]");
  if (!(beta > 0.0))
    throw ConfigError("kl_abc: beta must be positive");
  constexpr int kA = 0, kC = 2;
  TaskInstance t;
  t.name = "kl_abc";
  t.params = {{"H", H}, {"eps", eps_q}, {"beta", beta}};
  t.model = std::make_shared<UniformModel>(3, H);
  auto r = [](const Seq& y) { return contains(y, kC) ? 0.0 : 1.0; };
  t.tilt = TiltSpec::from_reward(r, beta, 1.0);
  t.reward = r;
  t.symbols = {"a", "b", "c"};
  const double em1 = std::expm1(1.0 / beta);
  // log V* = Q* / beta = log(1 + (2/3)^{H-h} (e^{1/beta} - 1) [c not in y]).
  auto log_vstar = [H, em1](const Seq& y) {
    if (contains(y, kC))
      return 0.0;
    return std::log1p(std::pow(2.0 / 3.0, H - static_cast<int>(y.size())) * em1);
  };
  attach_exact(t, log_vstar);
  const double bump = eps_q / beta;
  t.oracles["perturbed"] = ValueOracle(
      [log_vstar, bump](const Seq& y) {
        const double lv = log_vstar(y);
        return (!y.empty() && y.back() == kA) ? lv + bump : lv;
      },
      eps_q == 0.0, "perturbed");
  t.facts["q_root"] = {beta * std::log1p(std::pow(2.0 / 3.0, H) * em1), "closed_form"};
  return t;
}

// ---------------------------------------------------------------------------

namespace {

class ParityModel : public BaseModel {
public:
  ParityModel(int K, int M) : K_(K), H_(K * M) {}
  int alphabet_size() const override { return 2; }
  int horizon() const override { return H_; }
  void conditional(const Seq& prefix, std::vector<double>& probs) const override {
    probs.assign(2, 0.5);
    const int h = static_cast<int>(prefix.size()) + 1; // 1-based position being drawn
    if (h % K_ == 0) {
      int par = 0;
      for (int i = h - K_ + 1; i <= h - 1; ++i)
        par ^= prefix[static_cast<std::size_t>(i - 1)];
      probs[0] = par == 0 ? 1.0 : 0.0;
      probs[1] = 1.0 - probs[0];
    }
  }

private:
  int K_;
  int H_;
};

} // namespace

double parity_log_value(const Seq& y, int K, int M, bool ansatz) {
  const int h = static_cast<int>(y.size());
  const double l2 = std::log(2.0);
  if (h == 0)
    return -M * l2;
  const int tc = (h + K - 1) / K;
  for (int t = 1; t < tc; ++t)
    if (y[static_cast<std::size_t>(t * K - 1)] != 0)
      return kNegInf;
  double lv = (tc - M) * l2;
  if (h % K == 0) {
    if (y.back() != 0)
      return kNegInf;
  } else if (h % K == K - 1 && !ansatz) {
    int par = 0;
    for (int i = h + 2 - K; i <= h; ++i)
      par ^= y[static_cast<std::size_t>(i - 1)];
    if (par != 0)
      return kNegInf;
  } else {
    lv -= l2;
  }
  return lv;
}

TaskInstance parity_task(int K, int M) {
  if (K < 2 || M < 1)
    throw ConfigError("parity: need K >= 2 and M >= 1");
  TaskInstance t;
  t.name = "parity";
  t.params = {{"K", K}, {"M", M}, {"H", K * M}};
  t.model = std::make_shared<ParityModel>(K, M);
  t.tilt = TiltSpec::indicator([K, M](const Seq& y) {
    for (int s = 1; s <= M; ++s)
      if (y[static_cast<std::size_t>(s * K - 1)] != 0)
        return false;
    return true;
  });
  t.reward = t.tilt.tau;
  t.symbols = {"0", "1"};
  attach_exact(t, [K, M](const Seq& y) { return parity_log_value(y, K, M, false); });
  t.oracles["ansatz"] = ValueOracle(
      [K, M](const Seq& y) { return parity_log_value(y, K, M, true); }, true, "ansatz");
  t.facts["alrs_success"] = {std::pow(0.5, M), "closed_form"};
  t.facts["v_root"] = {std::pow(0.5, M), "closed_form"};
  return t;
}

// ---------------------------------------------------------------------------

namespace {

enum DyckSym { kOpenR = 0, kCloseR, kOpenS, kCloseS, kB, kE, kP, kS };
constexpr int kDyckA = 8;

struct DyckState {
  std::string stack; ///< '(' or '[' per open bracket
  bool broken = false;
};

bool apply_symbol(DyckState& st, int a) {
  switch (a) {
  case kOpenR: st.stack.push_back('('); return true;
  case kOpenS: st.stack.push_back('['); return true;
  case kCloseR:
  case kCloseS: {
    const char want = a == kCloseR ? '(' : '[';
    if (st.stack.empty() || st.stack.back() != want)
      return false;
    st.stack.pop_back();
    return true;
  }
  default: return false;
  }
}

class DyckModel : public BaseModel {
public:
  DyckModel(int H, DyckOptions opts, std::string prompt_stack)
      : H_(H), opts_(std::move(opts)), prompt_(std::move(prompt_stack)) {}
  int alphabet_size() const override { return kDyckA; }
  int horizon() const override { return H_; }

  DyckState state_of(const Seq& y) const {
    DyckState st{prompt_, false};
    for (int a : y)
      if (!st.broken && !apply_symbol(st, a))
        st.broken = true;
    return st;
  }

  void clean_policy(const DyckState& st, int remaining, std::vector<double>& p) const {
    p.assign(kDyckA, 0.0);
    if (st.broken) {
      std::fill(p.begin(), p.end(), 1.0 / kDyckA);
      return;
    }
    const int d = static_cast<int>(st.stack.size());
    const double close = d == 0 ? 0.0 : std::min(1.0, static_cast<double>(d) / remaining);
    if (close > 0.0)
      p[st.stack.back() == '(' ? kCloseR : kCloseS] = close;
    p[kOpenS] = (1.0 - close) * opts_.p_square;
    p[kOpenR] = (1.0 - close) * (1.0 - opts_.p_square);
  }

  void conditional(const Seq& prefix, std::vector<double>& probs) const override {
    clean_policy(state_of(prefix), H_ - static_cast<int>(prefix.size()), probs);
    for (double& x : probs)
      x = (1.0 - opts_.lambda) * x + opts_.lambda / kDyckA;
  }

private:
  int H_;
  DyckOptions opts_;
  std::string prompt_;
};

/// V* by a dynamic program over (stack, remaining length).
class DyckValue {
public:
  DyckValue(std::shared_ptr<const DyckModel> m, double lambda)
      : model_(std::move(m)), lambda_(lambda) {}

  double log_value(const Seq& y) const {
    const DyckState st = model_->state_of(y);
    return value(st, model_->horizon() - static_cast<int>(y.size()));
  }

private:
  double value(const DyckState& st, int remaining) const {
    const int d = static_cast<int>(st.stack.size());
    if (st.broken || d > remaining || (remaining - d) % 2 != 0)
      return kNegInf;
    if (remaining == 0)
      return 0.0;
    const std::string key = st.stack + '#' + std::to_string(remaining);
    {
      std::shared_lock lock(mu_);
      auto it = memo_.find(key);
      if (it != memo_.end())
        return it->second;
    }
    std::vector<double> probs, terms;
    model_->clean_policy(st, remaining, probs);
    for (int a = 0; a < kDyckA; ++a) {
      const double p = (1.0 - lambda_) * probs[static_cast<std::size_t>(a)] + lambda_ / kDyckA;
      if (!(p > 0.0))
        continue;
      DyckState next = st;
      if (!apply_symbol(next, a))
        continue;
      const double lv = value(next, remaining - 1);
      if (lv != kNegInf)
        terms.push_back(std::log(p) + lv);
    }
    const double out = log_sum_exp(terms);
    std::unique_lock lock(mu_);
    memo_.emplace(key, out);
    return out;
  }

  std::shared_ptr<const DyckModel> model_;
  double lambda_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::string, double> memo_;
};

bool dyck_completable(const DyckModel& m, const Seq& y) {
  const DyckState st = m.state_of(y);
  const int d = static_cast<int>(st.stack.size());
  const int remaining = m.horizon() - static_cast<int>(y.size());
  return !st.broken && d <= remaining && (remaining - d) % 2 == 0;
}

} // namespace

TaskInstance dyck_task(int H, const DyckOptions& opts) {
  if (H < 1)
    throw ConfigError("dyck: H must be >= 1");
  if (!(opts.lambda >= 0.0 && opts.lambda < 1.0))
    throw ConfigError("dyck: lambda must lie in [0, 1)");
  if (!(opts.p_square >= 0.0 && opts.p_square <= 1.0))
    throw ConfigError("dyck: p_square must lie in [0, 1]");
  DyckState prompt;
  for (char ch : opts.prefix) {
    int a;
    switch (ch) {
    case '(': a = kOpenR; break;
    case ')': a = kCloseR; break;
    case '[': a = kOpenS; break;
    case ']': a = kCloseS; break;
    default: throw ConfigError(std::string("dyck: prefix may only contain brackets, got '") + ch + "'");
    }
    if (!apply_symbol(prompt, a))
      throw DegenerateTarget("dyck: prefix closes a bracket that is not open");
  }
  const int d = static_cast<int>(prompt.stack.size());
  if (d > H || (H - d) % 2 != 0)
    throw DegenerateTarget("dyck: prefix cannot be balanced within H");

  auto model = std::make_shared<DyckModel>(H, opts, prompt.stack);
  TaskInstance t;
  t.name = "dyck";
  t.params = {{"H", H}, {"p_square", opts.p_square}, {"lambda", opts.lambda}, {"alpha", opts.alpha}};
  t.model = model;
  t.tilt = TiltSpec::indicator([model](const Seq& y) {
    const DyckState st = model->state_of(y);
    return !st.broken && st.stack.empty();
  });
  t.reward = t.tilt.tau;
  t.symbols = {"(", ")", "[", "]", "B", "E", "P", "S"};
  auto dp = std::make_shared<DyckValue>(model, opts.lambda);
  attach_exact(t, [dp](const Seq& y) { return dp->log_value(y); });
  t.oracles["geometric"] = geometric_oracle(
      [model](const Seq& y) { return dyck_completable(*model, y); }, opts.alpha, H, true);
  t.facts["v_root"] = {t.exact->value(Seq{}), "dynamic_program"};
  return t;
}

std::vector<int> dyck_open_positions(const Seq& y) {
  std::vector<int> out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == kOpenR || y[i] == kOpenS)
      out.push_back(static_cast<int>(i));
  return out;
}

// ---------------------------------------------------------------------------

TaskInstance beam_cx_task(int H) {
  if (H < 2 || H % 2 != 0)
    throw ConfigError("beam_cx: H must be even and >= 2");
  const int half = H / 2;
  const double l2 = std::log(2.0);
  TaskInstance t;
  t.name = "beam_cx";
  t.params = {{"H", H}};
  t.model = std::make_shared<UniformModel>(2, H);
  auto r = [H, half](const Seq& y) {
    if (y[0] == 1)
      return std::pow(2.0, 1 - half);
    for (int i = half; i < H; ++i)
      if (y[static_cast<std::size_t>(i)] != 0)
        return 0.0;
    return 1.0;
  };
  t.tilt.tau = r;
  t.reward = r;
  t.symbols = {"0", "1"};
  attach_exact(t, [H, half, l2](const Seq& y) {
    const int h = static_cast<int>(y.size());
    if (h == 0)
      return std::log(3.0) - (half + 1) * l2;
    if (y[0] == 1)
      return (1 - half) * l2;
    for (int i = half; i < h; ++i)
      if (y[static_cast<std::size_t>(i)] != 0)
        return kNegInf;
    return -static_cast<double>(H - std::max(h, half)) * l2;
  });
  // Sum of r^2 over sum of r: both halves have closed forms.
  const double lo = std::pow(2.0, half - 1);            // reward-1 leaves
  const double hi_count = std::pow(2.0, H - 1);         // y_1 = 1 leaves
  const double hi_r = std::pow(2.0, 1 - half);
  const double z = lo + hi_count * hi_r;
  t.facts["expected_reward"] = {(lo + hi_count * hi_r * hi_r) / z, "closed_form"};
  t.facts["reward_one_mass"] = {lo / z, "closed_form"};
  t.facts["beam_reward"] = {hi_r, "closed_form"};
  return t;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"abc", "delayed", "kl_abc", "parity", "dyck",
                                                 "beam_cx"};
  return names;
}

namespace {
double param(const std::map<std::string, double>& p, const std::string& k, double dflt) {
  auto it = p.find(k);
  return it == p.end() ? dflt : it->second;
}
int int_param(const std::map<std::string, double>& p, const std::string& k, int dflt) {
  const double v = param(p, k, dflt);
  if (v != std::floor(v))
    throw ConfigError("parameter '" + k + "' must be an integer");
  return static_cast<int>(v);
}
} // namespace

TaskInstance make_task(const std::string& name, const std::map<std::string, double>& p,
                       const std::string& prefix) {
  if (name == "abc")
    return abc_task(int_param(p, "H", 4), param(p, "eps", 0.3), param(p, "alpha", 0.5));
  if (name == "delayed")
    return delayed_task(int_param(p, "H", 4));
  if (name == "kl_abc")
    return kl_abc_task(int_param(p, "H", 4), param(p, "eps", 0.25), param(p, "beta", 0.25));
  if (name == "parity")
    return parity_task(int_param(p, "K", 4), int_param(p, "M", 2));
  if (name == "dyck") {
    DyckOptions o;
    o.p_square = param(p, "p_square", o.p_square);
    o.lambda = param(p, "lambda", o.lambda);
    o.alpha = param(p, "alpha", o.alpha);
    o.prefix = prefix;
    return dyck_task(int_param(p, "H", 8), o);
  }
  if (name == "beam_cx")
    return beam_cx_task(int_param(p, "H", 12));
  throw ConfigError("unknown task '" + name + "'");
}

} // namespace vgb
