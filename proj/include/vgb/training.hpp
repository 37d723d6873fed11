#pragma once

// Monte-Carlo rollouts and per-depth MLP value regression.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vgb/oracle.hpp"
#include "vgb/tree.hpp"

namespace vgb {

struct RolloutDataset {
  std::vector<Seq> leaves;
  std::vector<double> labels;
  std::uint64_t seed = 0;
  int horizon = 0;
  int alphabet = 0;
  std::size_t size() const { return leaves.size(); }
};

enum class LabelKind { tau, reward };

/// N i.i.d. paths from pi_ref labelled by tau (or r*). Reproducible per seed.
RolloutDataset generate_rollouts(const BaseModel& model, const TiltSpec& tilt, long N,
                                 std::uint64_t seed, LabelKind label = LabelKind::tau);

enum class Loss { bce, mse };

struct TrainConfig {
  int width = 128;
  double lr = 0.01;
  Loss loss = Loss::bce;
  /// batch_size == 0: `steps` full-batch steps on the deduplicated data.
  /// Otherwise minibatches of this size for `epochs` passes, or for `steps`
  /// batches when epochs == 0.
  int batch_size = 0;
  int steps = 100;
  int epochs = 0;
  /// L2 term added to the gradient before the Adam update.
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  static TrainConfig abc();
  static TrainConfig parity();
  static TrainConfig dyck();
};

/// A group of identical prefixes: count n, label sum s, label square sum q.
struct Example {
  Seq prefix;
  double n = 1.0;
  double s = 0.0;
  double q = 0.0;
};

/// One-hot(y_{1:h}) -> ReLU hidden layer -> logistic output.
class MlpValueNet {
public:
  MlpValueNet() = default;
  MlpValueNet(int depth, int alphabet, int width, std::uint64_t seed);

  int depth() const { return depth_; }
  int alphabet() const { return alphabet_; }
  int width() const { return width_; }

  /// Uses the first depth() actions of the sequence.
  double forward(const Seq& y) const;
  double logit(const Seq& y) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Mean loss over sum(n); writes the gradient of that mean when grad is set.
  double loss_and_grad(const std::vector<Example>& batch, Loss loss,
                       std::vector<double>* grad) const;

  /// Flat one-hot feature vector (depth * alphabet entries).
  std::vector<double> features(const Seq& y) const;

private:
  std::size_t w1(int j, int i) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(depth_ * alphabet_) +
           static_cast<std::size_t>(i);
  }
  std::size_t b1(int j) const { return static_cast<std::size_t>(width_ * depth_ * alphabet_ + j); }
  std::size_t w2(int j) const {
    return static_cast<std::size_t>(width_ * depth_ * alphabet_ + width_ + j);
  }
  std::size_t b2() const { return static_cast<std::size_t>(width_ * depth_ * alphabet_ + 2 * width_); }

  int depth_ = 0;
  int alphabet_ = 0;
  int width_ = 0;
  std::vector<double> params_;
};

struct TrainedNet {
  std::shared_ptr<const MlpValueNet> net;
  std::vector<double> loss_curve;
};

/// Regress the labels on depth-h prefixes.
TrainedNet train_value_net(const RolloutDataset& data, int h, const TrainConfig& cfg);

/// Nets indexed by depth; entries 1..H-1 are required, entry H only when
/// use_true_leaf_rewards is off. The root reports value 1 (never consulted
/// by the samplers).
ValueOracle assemble_trained_oracle(const std::vector<std::shared_ptr<const MlpValueNet>>& nets,
                                    const TiltSpec& tilt, int H, bool use_true_leaf_rewards);

struct TrainedBundle {
  std::vector<std::shared_ptr<const MlpValueNet>> nets; ///< index = depth
  std::vector<std::vector<double>> loss_curves;
  TrainConfig config;
  bool true_leaves = true;
  ValueOracle oracle;
};

/// Train depths 1..H-1 (and H when true leaves are off), up to `jobs`
/// depths at a time.
TrainedBundle train_all_depths(const RolloutDataset& data, const TiltSpec& tilt,
                               const TrainConfig& cfg, bool use_true_leaf_rewards, int jobs = 1);

/// JSON header line followed by the little-endian float64 parameter block.
void save_bundle(const std::string& path, const TrainedBundle& bundle);
/// The tilt is needed to rebuild the oracle with true leaf rewards.
TrainedBundle load_bundle(const std::string& path, const TiltSpec& tilt);

} // namespace vgb
