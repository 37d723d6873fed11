#pragma once

// Exact Markov chain behind the backtracking walk, built on the reachable part
// of the generation tree, plus the structural quantities used to certify it:
// stationary law, reversibility, conductance, mixing trajectory, Dirichlet
// form and bad sets.

#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vgb/oracle.hpp"
#include "vgb/tree.hpp"

namespace vgb {

struct ChainEdge {
  int to;
  double prob;
};

class ExactChain {
public:
  /// Nodes in DFS preorder; index 0 is the root.
  std::vector<Seq> nodes;
  std::vector<int> depth;
  std::vector<int> parent; ///< -1 at the root
  std::vector<std::vector<int>> children;
  /// log f(v, parent(v)) = log pi_ref(v) + log V-hat(v); -inf at the root.
  std::vector<double> log_f_up;
  std::vector<double> log_pi;   ///< log pi_ref(v)
  std::vector<double> log_v;    ///< log V-hat(v)
  /// Edge weights rescaled by exp(-log_scale) so the largest is 1.
  std::vector<double> f_up;
  double log_scale = 0.0;
  /// Sum over neighbours of the rescaled f, per node.
  std::vector<double> degree;
  /// Z_f in rescaled units (sum of degree).
  double z_f = 0.0;
  /// Sparse rows of P excluding the self loop, plus the self-loop mass.
  std::vector<std::vector<ChainEdge>> rows;
  std::vector<double> self_loop;
  int horizon = 0;

  std::size_t size() const { return nodes.size(); }
  int index_of(const Seq& s) const;
  bool is_leaf(int v) const { return depth[static_cast<std::size_t>(v)] == horizon; }
  /// P(w | v); zero for non-neighbours.
  double transition(int v, int w) const;

  std::unordered_map<Seq, int, SeqHash> index;
};

/// Enumerates nodes reachable through edges with f > 0 (pruned otherwise).
ExactChain build_chain(const BaseModel& model, const ValueOracle& oracle,
                       std::size_t cap = kDefaultEnumerationCap);

/// mu(v) = sum_{w ~ v} f(v, w) / Z_f over the reachable component.
std::vector<double> stationary(const ExactChain& chain);

/// || mu P - mu ||_1.
double stationarity_residual(const ExactChain& chain, const std::vector<double>& mu);

/// max over ordered pairs of |mu(u) P(v|u) - mu(v) P(u|v)|.
double detailed_balance_violation(const ExactChain& chain, const std::vector<double>& mu);

/// nu P for a row vector nu.
std::vector<double> step_distribution(const ExactChain& chain, const std::vector<double>& nu);

/// nu_t from the root point mass.
std::vector<double> marginal_at(const ExactChain& chain, long t);

/// chi2(nu_t || mu) for t = 0..T. Mass outside supp(mu) gives +inf.
std::vector<double> chi_square_trajectory(const ExactChain& chain, const std::vector<double>& mu,
                                          long T);

struct EnvelopeFit {
  double c = 0.0;        ///< fitted constant in c exp(-phi^2 t / 2) / mu(root)
  double residual = 0.0; ///< RMS of log-residuals over the fitted tail
  double max_ratio = 0.0; ///< max_t chi2_t / envelope_t with the fitted c
};

/// Least-squares fit of log chi2_t against the conductance envelope on t >= t0.
EnvelopeFit fit_mixing_envelope(const std::vector<double>& chi2, double phi, double mu_root,
                                long t0 = 1);

enum class CutMode { all_cuts, subtree_cuts };

struct ConductanceResult {
  double phi = 0.0;
  std::vector<int> cut; ///< node indices of the minimising set
};

/// all_cuts: brute force over S with 0 < mu(S) <= 1/2 (at most 20 nodes).
/// subtree_cuts: min over full subtrees T_v with v not
/// the root of f(v, parent) / (2 sum_{u in T_v} deg(u)). Connected root-free
/// sets are dominated by full subtrees, and dropping the mass constraint makes
/// this a lower bound on the true conductance.
ConductanceResult conductance(const ExactChain& chain, const std::vector<double>& mu, CutMode mode);

/// Phi_S for an explicit set.
double cut_conductance(const ExactChain& chain, const std::vector<double>& mu,
                       const std::vector<int>& set);

/// Leaf law of a node distribution: restrict to depth H and renormalise.
SeqDist leaf_conditional(const ExactChain& chain, const std::vector<double>& dist);

/// Mass of a node distribution on depth-H nodes.
double leaf_mass(const ExactChain& chain, const std::vector<double>& dist);

/// pi~(y) proportional to pi_ref(y) V-hat(y) over the chain's leaves.
SeqDist ideal_leaf_dist(const ExactChain& chain);

/// sum_{u,v} mu(u) P(v|u) (g(u)-g(v)) (g'(u)-g'(v)).
double dirichlet_form(const ExactChain& chain, const std::vector<double>& mu,
                      const std::vector<double>& g, const std::vector<double>& gp);

/// 2 <g, (I - P) g>_mu, the closed form of E(g, g).
double dirichlet_quadratic(const ExactChain& chain, const std::vector<double>& mu,
                           const std::vector<double>& g);

/// Depth-h nodes with pi_ref V-hat < eta^2/(4 kappa^2) times the V-hat-weighted
/// mass of their descendant leaves. Nodes absent from the chain have zero
/// weight and are included when their subtree has leaf mass.
std::vector<Seq> bad_set(const BaseModel& model, const ValueOracle& oracle, int h, double eta,
                         double kappa, std::size_t cap = kDefaultEnumerationCap);

} // namespace vgb

namespace vgb {

/// Same definition evaluated on the chain's reachable nodes only.
std::vector<int> bad_set(const ExactChain& chain, int h, double eta, double kappa);

/// pi*(set) for a set of depth-h prefixes.
double prefix_mass(const TargetDist& target, const std::vector<Seq>& prefixes);

} // namespace vgb
