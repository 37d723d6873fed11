#include "vgb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vgb/errors.hpp"

namespace vgb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log(double x) {
  if (x < 0.0)
    throw ContractViolation("value oracle returned a negative value");
  return x > 0.0 ? std::log(x) : kNegInf;
}

/// |A|^depth saturating at SIZE_MAX.
std::size_t subtree_leaves(int alphabet, int depth) {
  std::size_t n = 1;
  for (int i = 0; i < depth; ++i) {
    if (n > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(alphabet))
      return std::numeric_limits<std::size_t>::max();
    n *= static_cast<std::size_t>(alphabet);
  }
  return n;
}
} // namespace

ValueOracle::ValueOracle(LogFn log_fn, bool exact_at_leaves, std::string name)
    : log_fn_(std::move(log_fn)), exact_at_leaves_(exact_at_leaves), name_(std::move(name)) {}

ValueOracle ValueOracle::from_linear(std::function<double(const Seq&)> fn, bool exact_at_leaves,
                                     std::string name) {
  return ValueOracle([fn](const Seq& s) { return safe_log(fn(s)); }, exact_at_leaves,
                     std::move(name));
}

double ValueOracle::value(const Seq& seq) const {
  const double lv = log_fn_(seq);
  return lv == kNegInf ? 0.0 : std::exp(lv);
}

// ---------------------------------------------------------------------------
// ExactValue

ExactValue::ExactValue(std::shared_ptr<const BaseModel> model, TiltSpec tilt, std::size_t cap,
                       ClosedForm closed_form)
    : model_(std::move(model)), tilt_(std::move(tilt)), cap_(cap),
      closed_form_(std::move(closed_form)) {}

double ExactValue::log_value(const Seq& seq) const {
  if (static_cast<int>(seq.size()) > model_->horizon())
    throw ContractViolation("exact_value: depth exceeds horizon");
  if (closed_form_)
    return closed_form_(seq);
  Seq work = seq;
  return recurse(work);
}

double ExactValue::value(const Seq& seq) const {
  const double lv = log_value(seq);
  return lv == kNegInf ? 0.0 : std::exp(lv);
}

double ExactValue::recurse(Seq& seq) const {
  {
    std::shared_lock lock(mu_);
    auto it = memo_.find(seq);
    if (it != memo_.end())
      return it->second;
  }
  const int H = model_->horizon();
  const int h = static_cast<int>(seq.size());
  double result;
  if (h == H) {
    result = tilt_.log_tau(seq);
  } else {
    if (subtree_leaves(model_->alphabet_size(), H - h) > cap_)
      throw EnumerationCapExceeded("value not computable exactly: subtree exceeds cap " +
                                   std::to_string(cap_));
    const std::vector<double> probs = model_->conditional(seq);
    std::vector<double> terms;
    terms.reserve(probs.size());
    for (int a = 0; a < model_->alphabet_size(); ++a) {
      const double p = probs[static_cast<std::size_t>(a)];
      if (!(p > 0.0))
        continue;
      seq.push_back(a);
      const double lv = recurse(seq);
      seq.pop_back();
      terms.push_back(std::log(p) + lv);
    }
    result = log_sum_exp(terms);
  }
  std::unique_lock lock(mu_);
  memo_.emplace(seq, result);
  return result;
}

ValueOracle ExactValue::oracle() const {
  // The oracle keeps this object alive through a shared copy of its state.
  auto self = std::make_shared<ExactValue>(model_, tilt_, cap_, closed_form_);
  return ValueOracle([self](const Seq& s) { return self->log_value(s); }, true, "exact");
}

double exact_value(const BaseModel& model, const TiltSpec& tilt, const Seq& seq,
                   std::size_t cap) {
  const int H = model.horizon();
  const int h = static_cast<int>(seq.size());
  if (h > H)
    throw ContractViolation("exact_value: depth exceeds horizon");
  if (subtree_leaves(model.alphabet_size(), H - h) > cap)
    throw EnumerationCapExceeded("value not computable exactly: subtree exceeds cap " +
                                 std::to_string(cap));
  // Plain recursion; the caller asked for a single node.
  std::function<double(Seq&)> rec = [&](Seq& s) -> double {
    if (static_cast<int>(s.size()) == H)
      return tilt.log_tau(s);
    const std::vector<double> probs = model.conditional(s);
    std::vector<double> terms;
    for (int a = 0; a < model.alphabet_size(); ++a) {
      const double p = probs[static_cast<std::size_t>(a)];
      if (!(p > 0.0))
        continue;
      s.push_back(a);
      terms.push_back(std::log(p) + rec(s));
      s.pop_back();
    }
    return log_sum_exp(terms);
  };
  Seq work = seq;
  const double lv = rec(work);
  return lv == kNegInf ? 0.0 : std::exp(lv);
}

// ---------------------------------------------------------------------------
// Corrupted and heuristic oracles

ValueOracle perturbed_oracle(const ValueOracle& exact, double eps, int marked, int H) {
  if (eps < 0.0)
    throw ContractViolation("perturbed_oracle: eps must be >= 0");
  const double bump = std::log1p(eps);
  return ValueOracle(
      [exact, bump, marked, H](const Seq& s) {
        const double lv = exact.log_value(s);
        const int h = static_cast<int>(s.size());
        if (h > 0 && h < H && s.back() == marked)
          return lv + bump;
        return lv;
      },
      exact.exact_at_leaves(), "perturbed");
}

ValueOracle delayed_oracle(const ValueOracle& exact) {
  return ValueOracle(
      [exact](const Seq& s) {
        if (s.empty())
          return exact.log_value(s);
        return exact.log_value(Seq(s.begin(), s.end() - 1));
      },
      false, "delayed");
}

ValueOracle geometric_oracle(std::function<bool(const Seq&)> prefix_reward, double alpha, int H,
                             bool exact_at_leaves) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ConfigError("geometric_oracle: alpha must lie in (0, 1]");
  const double la = std::log(alpha);
  return ValueOracle(
      [prefix_reward, la, H](const Seq& s) {
        if (!prefix_reward(s))
          return kNegInf;
        return la * static_cast<double>(H - static_cast<int>(s.size()));
      },
      exact_at_leaves, "geometric");
}

ValueOracle with_true_leaves(const ValueOracle& oracle, const TiltSpec& tilt, int H) {
  return ValueOracle(
      [oracle, tilt, H](const Seq& s) {
        if (static_cast<int>(s.size()) == H)
          return tilt.log_tau(s);
        return oracle.log_value(s);
      },
      true, oracle.name());
}

ValueOracle memoized(const ValueOracle& oracle) {
  struct Memo {
    std::shared_mutex mu;
    std::unordered_map<Seq, double, SeqHash> table;
  };
  auto memo = std::make_shared<Memo>();
  return ValueOracle(
      [oracle, memo](const Seq& s) {
        {
          std::shared_lock lock(memo->mu);
          auto it = memo->table.find(s);
          if (it != memo->table.end())
            return it->second;
        }
        const double lv = oracle.log_value(s);
        std::unique_lock lock(memo->mu);
        memo->table.emplace(s, lv);
        return lv;
      },
      oracle.exact_at_leaves(), oracle.name());
}

ValueOracle implicit_oracle(std::shared_ptr<const BaseModel> model,
                            std::function<void(const Seq&, std::vector<double>&)> policy) {
  return ValueOracle(
      [model, policy](const Seq& s) {
        double lv = 0.0;
        Seq prefix;
        std::vector<double> ref, pol;
        for (int a : s) {
          model->conditional(prefix, ref);
          pol.assign(ref.size(), 0.0);
          policy(prefix, pol);
          const double pr = ref[static_cast<std::size_t>(a)];
          const double pp = pol[static_cast<std::size_t>(a)];
          if (!(pp > 0.0))
            return kNegInf;
          if (!(pr > 0.0))
            throw ContractViolation("implicit_oracle: policy not absolutely continuous");
          lv += std::log(pp) - std::log(pr);
          prefix.push_back(a);
        }
        return lv;
      },
      false, "implicit");
}

ValueOracle consistent_oracle(const BaseModel& model,
                              const std::function<double(const Seq&)>& leaf_log_value,
                              std::size_t cap) {
  const int H = model.horizon();
  auto table = std::make_shared<std::unordered_map<Seq, double, SeqHash>>();
  std::function<double(Seq&)> rec = [&](Seq& s) -> double {
    if (table->size() > cap)
      throw EnumerationCapExceeded("consistent_oracle: tree exceeds cap");
    double lv;
    if (static_cast<int>(s.size()) == H) {
      lv = leaf_log_value(s);
    } else {
      const std::vector<double> probs = model.conditional(s);
      std::vector<double> terms;
      for (int a = 0; a < model.alphabet_size(); ++a) {
        const double p = probs[static_cast<std::size_t>(a)];
        if (!(p > 0.0))
          continue;
        s.push_back(a);
        terms.push_back(std::log(p) + rec(s));
        s.pop_back();
      }
      lv = log_sum_exp(terms);
    }
    table->emplace(s, lv);
    return lv;
  };
  Seq root;
  rec(root);
  return ValueOracle(
      [table](const Seq& s) {
        auto it = table->find(s);
        return it == table->end() ? kNegInf : it->second;
      },
      false, "consistent");
}

// ---------------------------------------------------------------------------
// Error measurements

double ErrorProfile::kappa_avg() const {
  double k = 1.0;
  for (std::size_t h = 1; h < avg_over.size(); ++h)
    k = std::max({k, avg_over[h], avg_under[h]});
  return k;
}

ErrorProfile error_profile(const BaseModel& model, const ValueOracle& oracle,
                           const ValueOracle& exact, const TargetDist& target,
                           const ProfileOptions& opts) {
  const int H = model.horizon();
  ErrorProfile prof;
  prof.avg_over.assign(static_cast<std::size_t>(H) + 1, 0.0);
  prof.avg_under.assign(static_cast<std::size_t>(H) + 1, 0.0);

  // Uniform ratios over every node in the support of pi_ref.
  for_each_node(
      model,
      [&](const Seq& s, double) {
        const int h = static_cast<int>(s.size());
        if (h == 0)
          return true;
        const double lv = oracle.log_value(s);
        const double ls = exact.log_value(s);
        if (lv == kNegInf && ls == kNegInf)
          return !opts.prune_zero_subtrees;
        const double ratio = (lv == kNegInf || ls == kNegInf) ? kInf : std::exp(std::abs(lv - ls));
        double& slot = (h == H) ? prof.kappa_leaf : prof.kappa_sup;
        slot = std::max(slot, ratio);
        return true;
      },
      opts.cap);

  // pi*-averages per depth.
  for (int h = 1; h <= H; ++h) {
    const SeqDist marg = prefix_marginal(target.prob, h);
    double over = 0.0, under = 0.0;
    for (const auto& [s, p] : marg) {
      if (!(p > 0.0))
        continue;
      const double lv = oracle.log_value(s);
      const double ls = exact.log_value(s);
      if (lv == kNegInf) {
        under = kInf;
        continue;
      }
      over += p * std::exp(lv - ls);
      under += p * std::exp(ls - lv);
    }
    prof.avg_over[static_cast<std::size_t>(h)] = over;
    prof.avg_under[static_cast<std::size_t>(h)] = under;
  }
  return prof;
}

double bellman_defect(const BaseModel& model, const ValueOracle& oracle, std::size_t cap) {
  const int H = model.horizon();
  double worst = 0.0;
  std::vector<double> probs;
  for_each_node(
      model,
      [&](const Seq& s, double) {
        if (static_cast<int>(s.size()) == H)
          return false;
        model.conditional(s, probs);
        double sum = 0.0;
        Seq child = s;
        child.push_back(0);
        for (int a = 0; a < model.alphabet_size(); ++a) {
          const double p = probs[static_cast<std::size_t>(a)];
          if (!(p > 0.0))
            continue;
          child.back() = a;
          sum += p * oracle.value(child);
        }
        const double v = oracle.value(s);
        worst = std::max(worst, std::abs(v - sum) / std::max(v, kBellmanFloor));
        return true;
      },
      cap);
  return worst;
}

} // namespace vgb
