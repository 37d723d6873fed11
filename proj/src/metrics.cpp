#include "vgb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "vgb/errors.hpp"

namespace vgb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_nonneg(double x) {
  if (x < 0.0 || std::isnan(x))
    throw ContractViolation("divergence: negative or NaN entry");
}

void check_sizes(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw ContractViolation("divergence: tables differ in size");
}

template <class F>
void zip(const SeqDist& p, const SeqDist& q, F&& f) {
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      f(a->second, 0.0);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      f(0.0, b->second);
      ++b;
    } else {
      f(a->second, b->second);
      ++a;
      ++b;
    }
  }
}

struct TvAcc {
  double s = 0.0;
  void operator()(double x, double y) {
    check_nonneg(x);
    check_nonneg(y);
    s += std::abs(x - y);
  }
  double result() const { return 0.5 * s; }
};

struct KlAcc {
  double s = 0.0;
  void operator()(double x, double y) {
    check_nonneg(x);
    check_nonneg(y);
    if (x == 0.0)
      return;
    if (y == 0.0) {
      s = kInf;
      return;
    }
    s += x * std::log(x / y);
  }
  double result() const { return std::max(0.0, s); }
};

struct Chi2Acc {
  double s = 0.0;
  void operator()(double x, double y) {
    check_nonneg(x);
    check_nonneg(y);
    if (y == 0.0) {
      if (x > 0.0)
        s = kInf;
      return;
    }
    s += (x - y) * (x - y) / y;
  }
  double result() const { return s; }
};

template <class Acc>
double over_vectors(const std::vector<double>& p, const std::vector<double>& q) {
  check_sizes(p, q);
  Acc acc;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc(p[i], q[i]);
  return acc.result();
}

template <class Acc>
double over_tables(const SeqDist& p, const SeqDist& q) {
  Acc acc;
  zip(p, q, acc);
  return acc.result();
}

} // namespace

double tv(const std::vector<double>& p, const std::vector<double>& q) {
  return over_vectors<TvAcc>(p, q);
}
double kl(const std::vector<double>& p, const std::vector<double>& q) {
  return over_vectors<KlAcc>(p, q);
}
double chi2(const std::vector<double>& p, const std::vector<double>& q) {
  return over_vectors<Chi2Acc>(p, q);
}
double tv(const SeqDist& p, const SeqDist& q) { return over_tables<TvAcc>(p, q); }
double kl(const SeqDist& p, const SeqDist& q) { return over_tables<KlAcc>(p, q); }
double chi2(const SeqDist& p, const SeqDist& q) { return over_tables<Chi2Acc>(p, q); }

// ---------------------------------------------------------------------------

SeqDist leaf_counts(const std::vector<RunRecord>& records) {
  SeqDist counts;
  for (const auto& r : records)
    if (r.is_leaf)
      counts[r.terminal] += 1.0;
  return counts;
}

double nonleaf_fraction(const std::vector<RunRecord>& records) {
  if (records.empty())
    return 0.0;
  const auto k = std::count_if(records.begin(), records.end(),
                               [](const RunRecord& r) { return !r.is_leaf; });
  return static_cast<double>(k) / static_cast<double>(records.size());
}

EmpiricalDist smooth(const SeqDist& counts, SmoothMode mode, const std::vector<Seq>* support) {
  EmpiricalDist out;
  out.mode = mode;
  for (const auto& [s, c] : counts) {
    if (c < 0.0)
      throw ContractViolation("smooth: negative count");
    out.n += c;
  }
  out.prob = counts;
  if (mode == SmoothMode::add_half) {
    if (support == nullptr)
      throw ContractViolation("smooth: add_half needs a declared support");
    for (const Seq& s : *support)
      out.prob[s] += 0.5;
  }
  double total = 0.0;
  for (const auto& [s, c] : out.prob)
    total += c;
  if (!(total > 0.0))
    throw ContractViolation("smooth: empty table");
  for (auto& [s, c] : out.prob)
    c /= total;
  return out;
}

double coverage_quantile(const TargetDist& target, const SeqDist& pihat, double c) {
  double q = 0.0;
  for (const auto& [y, p] : target.prob) {
    auto it = pihat.find(y);
    const double ph = it == pihat.end() ? 0.0 : it->second;
    if (!(ph > 0.0) || p / ph > c)
      q += p;
  }
  return q;
}

double kl_regret(const SeqDist& pihat, const TargetDist& target, double beta) {
  return beta * kl(pihat, target.prob);
}

AccuracyDiversity accuracy_diversity(const std::vector<RunRecord>& records,
                                     const std::function<double(const Seq&)>& reward, int H) {
  AccuracyDiversity out;
  if (records.empty()) {
    out.empty = true;
    return out;
  }
  std::set<Seq> distinct;
  long correct = 0;
  for (const auto& r : records) {
    if (!r.is_leaf || static_cast<int>(r.terminal.size()) != H)
      continue;
    if (reward(r.terminal) == 1.0) {
      ++correct;
      distinct.insert(r.terminal);
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  out.distinct_correct = static_cast<long>(distinct.size());
  return out;
}

double position_histogram_error(const std::vector<Seq>& samples,
                                const std::vector<Seq>& target_samples,
                                const std::function<std::vector<int>(const Seq&)>& feature) {
  std::map<int, double> a, b;
  for (const Seq& s : samples)
    for (int p : feature(s))
      a[p] += 1.0;
  for (const Seq& s : target_samples)
    for (int p : feature(s))
      b[p] += 1.0;
  const double scale = samples.empty() ? 0.0
                                       : static_cast<double>(target_samples.size()) /
                                             static_cast<double>(samples.size());
  std::set<int> keys;
  for (const auto& [k, v] : a)
    keys.insert(k);
  for (const auto& [k, v] : b)
    keys.insert(k);
  double err = 0.0;
  for (int k : keys)
    err += std::abs(scale * (a.count(k) ? a[k] : 0.0) - (b.count(k) ? b[k] : 0.0));
  return err;
}

Summary summarize(std::vector<double> xs) {
  Summary s;
  s.n = static_cast<long>(xs.size());
  if (xs.empty())
    return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs)
      v += (x - s.mean) * (x - s.mean);
    v /= static_cast<double>(xs.size() - 1);
    s.stderr_ = std::sqrt(v / static_cast<double>(xs.size()));
  }
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  s.p50 = xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
  return s;
}

Interval bootstrap_mean_ci(const std::vector<double>& xs, int resamples, double level, Rng& rng) {
  if (xs.empty() || resamples < 1)
    throw ContractViolation("bootstrap_mean_ci: need data and resamples >= 1");
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s += xs[rng.index(xs.size())];
    m = s / static_cast<double>(xs.size());
  }
  std::sort(means.begin(), means.end());
  const double a = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1)));
    return means[std::min(k, means.size() - 1)];
  };
  return {at(a), at(1.0 - a)};
}

} // namespace vgb
