#pragma once

// Divergences, coverage and regret against pi*, plus the aggregate statistics
// reported for sampler runs.

#include <functional>
#include <string>
#include <vector>

#include "vgb/rng.hpp"
#include "vgb/samplers.hpp"
#include "vgb/tree.hpp"

namespace vgb {

double tv(const std::vector<double>& p, const std::vector<double>& q);
double kl(const std::vector<double>& p, const std::vector<double>& q);
double chi2(const std::vector<double>& p, const std::vector<double>& q);

/// Over the union of keys; missing keys count as zero.
double tv(const SeqDist& p, const SeqDist& q);
double kl(const SeqDist& p, const SeqDist& q);
double chi2(const SeqDist& p, const SeqDist& q);

enum class SmoothMode { none, add_half };

struct EmpiricalDist {
  SeqDist prob;
  double n = 0.0; ///< raw count total
  SmoothMode mode = SmoothMode::none;
};

/// Leaf counts of a batch of runs; non-leaf terminals are skipped.
SeqDist leaf_counts(const std::vector<RunRecord>& records);
double nonleaf_fraction(const std::vector<RunRecord>& records);

/// add_half adds 0.5 to every cell of `support` (required) before
/// normalising; counts outside the support are kept.
EmpiricalDist smooth(const SeqDist& counts, SmoothMode mode,
                     const std::vector<Seq>* support = nullptr);

/// Pr_{y ~ pi*}[pi*(y) / pihat(y) > c], with pihat(y) = 0 always exceeding.
double coverage_quantile(const TargetDist& target, const SeqDist& pihat, double c);

/// beta * KL(pihat || pi*).
double kl_regret(const SeqDist& pihat, const TargetDist& target, double beta);

struct AccuracyDiversity {
  double accuracy = 0.0;
  long distinct_correct = 0;
  bool empty = false;
};

/// Accuracy is the fraction of records with reward 1; non-leaf records are
/// incorrect.
AccuracyDiversity accuracy_diversity(const std::vector<RunRecord>& records,
                                     const std::function<double(const Seq&)>& reward, int H);

/// L1 distance between position histograms, with the records' histogram
/// rescaled to the number of target samples.
double position_histogram_error(const std::vector<Seq>& samples,
                                const std::vector<Seq>& target_samples,
                                const std::function<std::vector<int>(const Seq&)>& feature);

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
  double p50 = 0.0;
  long n = 0;
};

Summary summarize(std::vector<double> xs);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap interval for the mean.
Interval bootstrap_mean_ci(const std::vector<double>& xs, int resamples, double level, Rng& rng);

} // namespace vgb
