#include "vgb/chain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "vgb/errors.hpp"

namespace vgb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int ExactChain::index_of(const Seq& s) const {
  auto it = index.find(s);
  return it == index.end() ? -1 : it->second;
}

double ExactChain::transition(int v, int w) const {
  if (v == w)
    return self_loop[static_cast<std::size_t>(v)];
  for (const ChainEdge& e : rows[static_cast<std::size_t>(v)])
    if (e.to == w)
      return e.prob;
  return 0.0;
}

ExactChain build_chain(const BaseModel& model, const ValueOracle& oracle, std::size_t cap) {
  ExactChain c;
  const int H = model.horizon();
  c.horizon = H;

  auto add = [&](const Seq& s, int parent, double log_pi, double log_v) {
    if (c.nodes.size() >= cap)
      throw EnumerationCapExceeded("build_chain: more than " + std::to_string(cap) + " nodes");
    const int id = static_cast<int>(c.nodes.size());
    c.nodes.push_back(s);
    c.depth.push_back(static_cast<int>(s.size()));
    c.parent.push_back(parent);
    c.children.emplace_back();
    c.log_pi.push_back(log_pi);
    c.log_v.push_back(log_v);
    c.log_f_up.push_back(parent < 0 ? kNegInf : log_pi + log_v);
    c.index.emplace(s, id);
    if (parent >= 0)
      c.children[static_cast<std::size_t>(parent)].push_back(id);
    return id;
  };

  Seq seq;
  std::vector<double> probs;
  std::function<void(int)> grow = [&](int id) {
    if (static_cast<int>(seq.size()) == H)
      return;
    model.conditional(seq, probs);
    const std::vector<double> p = probs;
    const double base = c.log_pi[static_cast<std::size_t>(id)];
    for (int a = 0; a < model.alphabet_size(); ++a) {
      if (!(p[static_cast<std::size_t>(a)] > 0.0))
        continue;
      seq.push_back(a);
      const double lv = oracle.log_value(seq);
      if (lv != kNegInf) {
        const int child = add(seq, id, base + std::log(p[static_cast<std::size_t>(a)]), lv);
        grow(child);
      }
      seq.pop_back();
    }
  };
  add(seq, -1, 0.0, oracle.log_value(seq));
  grow(0);

  const std::size_t n = c.nodes.size();
  c.log_scale = kNegInf;
  for (double lf : c.log_f_up)
    c.log_scale = std::max(c.log_scale, lf);
  if (c.log_scale == kNegInf)
    c.log_scale = 0.0;
  c.f_up.assign(n, 0.0);
  for (std::size_t v = 1; v < n; ++v)
    c.f_up[v] = std::exp(c.log_f_up[v] - c.log_scale);

  c.degree.assign(n, 0.0);
  for (std::size_t v = 1; v < n; ++v) {
    c.degree[v] += c.f_up[v];
    c.degree[static_cast<std::size_t>(c.parent[v])] += c.f_up[v];
  }
  c.z_f = std::accumulate(c.degree.begin(), c.degree.end(), 0.0);

  c.rows.assign(n, {});
  c.self_loop.assign(n, 1.0);
  for (std::size_t v = 0; v < n; ++v) {
    const double d = c.degree[v];
    if (!(d > 0.0))
      continue;
    c.self_loop[v] = 0.5;
    if (c.parent[v] >= 0)
      c.rows[v].push_back({c.parent[v], c.f_up[v] / (2.0 * d)});
    for (int w : c.children[v])
      c.rows[v].push_back({w, c.f_up[static_cast<std::size_t>(w)] / (2.0 * d)});
  }
  return c;
}

std::vector<double> stationary(const ExactChain& chain) {
  std::vector<double> mu(chain.size(), 0.0);
  if (!(chain.z_f > 0.0)) {
    mu[0] = 1.0;
    return mu;
  }
  for (std::size_t v = 0; v < chain.size(); ++v)
    mu[v] = chain.degree[v] / chain.z_f;
  return mu;
}

std::vector<double> step_distribution(const ExactChain& chain, const std::vector<double>& nu) {
  std::vector<double> out(chain.size(), 0.0);
  for (std::size_t v = 0; v < chain.size(); ++v) {
    const double m = nu[v];
    if (m == 0.0)
      continue;
    out[v] += m * chain.self_loop[v];
    for (const ChainEdge& e : chain.rows[v])
      out[static_cast<std::size_t>(e.to)] += m * e.prob;
  }
  return out;
}

double stationarity_residual(const ExactChain& chain, const std::vector<double>& mu) {
  const std::vector<double> next = step_distribution(chain, mu);
  double r = 0.0;
  for (std::size_t v = 0; v < mu.size(); ++v)
    r += std::abs(next[v] - mu[v]);
  return r;
}

double detailed_balance_violation(const ExactChain& chain, const std::vector<double>& mu) {
  double worst = 0.0;
  for (std::size_t u = 0; u < chain.size(); ++u) {
    for (const ChainEdge& e : chain.rows[u]) {
      const double fwd = mu[u] * e.prob;
      const double back = mu[static_cast<std::size_t>(e.to)] * chain.transition(e.to, static_cast<int>(u));
      worst = std::max(worst, std::abs(fwd - back));
    }
  }
  return worst;
}

std::vector<double> marginal_at(const ExactChain& chain, long t) {
  if (t < 0)
    throw ContractViolation("marginal_at: t must be >= 0");
  std::vector<double> nu(chain.size(), 0.0);
  nu[0] = 1.0;
  for (long i = 0; i < t; ++i)
    nu = step_distribution(chain, nu);
  return nu;
}

namespace {
double chi2_to(const std::vector<double>& nu, const std::vector<double>& mu) {
  double s = 0.0;
  for (std::size_t v = 0; v < nu.size(); ++v) {
    if (mu[v] > 0.0) {
      const double d = nu[v] - mu[v];
      s += d * d / mu[v];
    } else if (nu[v] > 0.0) {
      return kInf;
    }
  }
  return s;
}
} // namespace

std::vector<double> chi_square_trajectory(const ExactChain& chain, const std::vector<double>& mu,
                                          long T) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(T) + 1);
  std::vector<double> nu(chain.size(), 0.0);
  nu[0] = 1.0;
  out.push_back(chi2_to(nu, mu));
  for (long t = 1; t <= T; ++t) {
    nu = step_distribution(chain, nu);
    out.push_back(chi2_to(nu, mu));
  }
  return out;
}

EnvelopeFit fit_mixing_envelope(const std::vector<double>& chi2, double phi, double mu_root,
                                long t0) {
  EnvelopeFit fit;
  std::vector<double> resid;
  for (std::size_t t = static_cast<std::size_t>(std::max(0L, t0)); t < chi2.size(); ++t) {
    if (!(chi2[t] > 0.0) || std::isinf(chi2[t]))
      continue;
    const double log_env = -phi * phi * static_cast<double>(t) / 2.0 - std::log(mu_root);
    resid.push_back(std::log(chi2[t]) - log_env);
  }
  if (resid.empty())
    return fit;
  const double mean = std::accumulate(resid.begin(), resid.end(), 0.0) / static_cast<double>(resid.size());
  double ss = 0.0, mx = kNegInf;
  for (double r : resid) {
    ss += (r - mean) * (r - mean);
    mx = std::max(mx, r - mean);
  }
  fit.c = std::exp(mean);
  fit.residual = std::sqrt(ss / static_cast<double>(resid.size()));
  fit.max_ratio = std::exp(mx);
  return fit;
}

double cut_conductance(const ExactChain& chain, const std::vector<double>& mu,
                       const std::vector<int>& set) {
  std::vector<char> in(chain.size(), 0);
  double mass = 0.0;
  for (int v : set) {
    in[static_cast<std::size_t>(v)] = 1;
    mass += mu[static_cast<std::size_t>(v)];
  }
  if (!(mass > 0.0))
    return kInf;
  double flow = 0.0;
  for (int v : set)
    for (const ChainEdge& e : chain.rows[static_cast<std::size_t>(v)])
      if (!in[static_cast<std::size_t>(e.to)])
        flow += mu[static_cast<std::size_t>(v)] * e.prob;
  return flow / mass;
}

ConductanceResult conductance(const ExactChain& chain, const std::vector<double>& mu, CutMode mode) {
  ConductanceResult res;
  res.phi = kInf;
  const std::size_t n = chain.size();
  if (mode == CutMode::all_cuts) {
    if (n > 20)
      throw EnumerationCapExceeded("conductance(all_cuts): more than 20 nodes");
    const std::uint32_t full = (1u << n);
    for (std::uint32_t mask = 1; mask < full; ++mask) {
      double mass = 0.0;
      for (std::size_t v = 0; v < n; ++v)
        if (mask >> v & 1u)
          mass += mu[v];
      if (!(mass > 0.0) || mass > 0.5 + 1e-15)
        continue;
      double flow = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        if (!(mask >> v & 1u))
          continue;
        for (const ChainEdge& e : chain.rows[v])
          if (!(mask >> e.to & 1u))
            flow += mu[v] * e.prob;
      }
      const double phi = flow / mass;
      if (phi < res.phi) {
        res.phi = phi;
        res.cut.clear();
        for (std::size_t v = 0; v < n; ++v)
          if (mask >> v & 1u)
            res.cut.push_back(static_cast<int>(v));
      }
    }
    return res;
  }

  // Preorder layout: every child index exceeds its parent's.
  std::vector<double> sub(chain.degree);
  for (std::size_t v = n; v-- > 1;)
    sub[static_cast<std::size_t>(chain.parent[v])] += sub[v];
  int best = -1;
  for (std::size_t v = 1; v < n; ++v) {
    if (!(sub[v] > 0.0))
      continue;
    const double phi = chain.f_up[v] / (2.0 * sub[v]);
    if (phi < res.phi) {
      res.phi = phi;
      best = static_cast<int>(v);
    }
  }
  if (best >= 0) {
    std::vector<int> stack{best};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      res.cut.push_back(v);
      for (int w : chain.children[static_cast<std::size_t>(v)])
        stack.push_back(w);
    }
    std::sort(res.cut.begin(), res.cut.end());
  }
  return res;
}

double leaf_mass(const ExactChain& chain, const std::vector<double>& dist) {
  double m = 0.0;
  for (std::size_t v = 0; v < chain.size(); ++v)
    if (chain.depth[v] == chain.horizon)
      m += dist[v];
  return m;
}

SeqDist leaf_conditional(const ExactChain& chain, const std::vector<double>& dist) {
  const double m = leaf_mass(chain, dist);
  if (!(m > 0.0))
    throw DegenerateTarget("leaf_conditional: no mass on leaves");
  SeqDist out;
  for (std::size_t v = 0; v < chain.size(); ++v)
    if (chain.depth[v] == chain.horizon && dist[v] > 0.0)
      out.emplace(chain.nodes[v], dist[v] / m);
  return out;
}

SeqDist ideal_leaf_dist(const ExactChain& chain) {
  std::vector<double> lw;
  std::vector<std::size_t> ids;
  for (std::size_t v = 0; v < chain.size(); ++v) {
    if (chain.depth[v] != chain.horizon)
      continue;
    lw.push_back(chain.log_pi[v] + chain.log_v[v]);
    ids.push_back(v);
  }
  const double lz = log_sum_exp(lw);
  if (lz == kNegInf)
    throw DegenerateTarget("ideal_leaf_dist: no reachable leaf with positive value");
  SeqDist out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.emplace(chain.nodes[ids[i]], std::exp(lw[i] - lz));
  return out;
}

double dirichlet_form(const ExactChain& chain, const std::vector<double>& mu,
                      const std::vector<double>& g, const std::vector<double>& gp) {
  double s = 0.0;
  for (std::size_t u = 0; u < chain.size(); ++u)
    for (const ChainEdge& e : chain.rows[u]) {
      const auto w = static_cast<std::size_t>(e.to);
      s += mu[u] * e.prob * (g[u] - g[w]) * (gp[u] - gp[w]);
    }
  return s;
}

double dirichlet_quadratic(const ExactChain& chain, const std::vector<double>& mu,
                           const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t u = 0; u < chain.size(); ++u) {
    double pg = chain.self_loop[u] * g[u];
    for (const ChainEdge& e : chain.rows[u])
      pg += e.prob * g[static_cast<std::size_t>(e.to)];
    s += mu[u] * g[u] * (g[u] - pg);
  }
  return 2.0 * s;
}

std::vector<Seq> bad_set(const BaseModel& model, const ValueOracle& oracle, int h, double eta,
                         double kappa, std::size_t cap) {
  const int H = model.horizon();
  if (h < 0 || h > H)
    throw ContractViolation("bad_set: depth out of range");
  std::vector<Seq> out;
  if (!(eta > 0.0))
    return out;
  const double log_factor = 2.0 * std::log(eta) - std::log(4.0 * kappa * kappa);
  std::size_t count = 0;
  Seq seq;
  std::vector<double> probs;
  // Returns log of sum over descendant leaves of pi_ref V-hat.
  std::function<double(double)> rec = [&](double log_pi) -> double {
    if (++count > cap)
      throw EnumerationCapExceeded("bad_set: tree exceeds cap");
    const int d = static_cast<int>(seq.size());
    double leaf_sum;
    if (d == H) {
      leaf_sum = log_pi + oracle.log_value(seq);
    } else {
      model.conditional(seq, probs);
      const std::vector<double> p = probs;
      std::vector<double> terms;
      for (int a = 0; a < model.alphabet_size(); ++a) {
        if (!(p[static_cast<std::size_t>(a)] > 0.0))
          continue;
        seq.push_back(a);
        terms.push_back(rec(log_pi + std::log(p[static_cast<std::size_t>(a)])));
        seq.pop_back();
      }
      leaf_sum = log_sum_exp(terms);
    }
    if (d == h && leaf_sum != kNegInf) {
      const double own = log_pi + oracle.log_value(seq);
      if (own < log_factor + leaf_sum)
        out.push_back(seq);
    }
    return leaf_sum;
  };
  rec(0.0);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> bad_set(const ExactChain& chain, int h, double eta, double kappa) {
  std::vector<int> out;
  if (!(eta > 0.0))
    return out;
  const std::size_t n = chain.size();
  std::vector<std::vector<double>> terms(n);
  std::vector<double> leaf_sum(n, kNegInf);
  for (std::size_t v = n; v-- > 0;) {
    if (chain.depth[v] == chain.horizon)
      leaf_sum[v] = chain.log_pi[v] + chain.log_v[v];
    else
      leaf_sum[v] = log_sum_exp(terms[v]);
    if (chain.parent[v] >= 0)
      terms[static_cast<std::size_t>(chain.parent[v])].push_back(leaf_sum[v]);
  }
  const double log_factor = 2.0 * std::log(eta) - std::log(4.0 * kappa * kappa);
  for (std::size_t v = 0; v < n; ++v) {
    if (chain.depth[v] != h || leaf_sum[v] == kNegInf)
      continue;
    if (chain.log_pi[v] + chain.log_v[v] < log_factor + leaf_sum[v])
      out.push_back(static_cast<int>(v));
  }
  return out;
}

double prefix_mass(const TargetDist& target, const std::vector<Seq>& prefixes) {
  double m = 0.0;
  for (const auto& [leaf, p] : target.prob)
    for (const Seq& pre : prefixes)
      if (pre.size() <= leaf.size() && std::equal(pre.begin(), pre.end(), leaf.begin())) {
        m += p;
        break;
      }
  return m;
}

} // namespace vgb
