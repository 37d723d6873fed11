#include "vgb/training.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "vgb/errors.hpp"
#include "vgb/rng.hpp"
#include "vgb/samplers.hpp"

namespace vgb {

RolloutDataset generate_rollouts(const BaseModel& model, const TiltSpec& tilt, long N,
                                 std::uint64_t seed, LabelKind label) {
  if (N < 0)
    throw ContractViolation("generate_rollouts: N must be >= 0");
  if (label == LabelKind::reward && !tilt.has_reward())
    throw ContractViolation("generate_rollouts: tilt has no reward form");
  RolloutDataset d;
  d.seed = seed;
  d.horizon = model.horizon();
  d.alphabet = model.alphabet_size();
  d.leaves.reserve(static_cast<std::size_t>(N));
  d.labels.reserve(static_cast<std::size_t>(N));
  Rng rng(seed);
  for (long i = 0; i < N; ++i) {
    Seq y = sample_path(model, rng);
    d.labels.push_back(label == LabelKind::tau ? tilt(y) : tilt.reward(y));
    d.leaves.push_back(std::move(y));
  }
  return d;
}

TrainConfig TrainConfig::abc() { return {}; }

TrainConfig TrainConfig::parity() {
  TrainConfig c;
  c.lr = 1e-3;
  c.loss = Loss::mse;
  c.batch_size = 128;
  c.steps = 10000;
  return c;
}

TrainConfig TrainConfig::dyck() {
  TrainConfig c;
  c.width = 64;
  c.lr = 3e-3;
  c.loss = Loss::mse;
  c.batch_size = 32;
  c.epochs = 40;
  c.weight_decay = 0.1;
  return c;
}

// ---------------------------------------------------------------------------

MlpValueNet::MlpValueNet(int depth, int alphabet, int width, std::uint64_t seed)
    : depth_(depth), alphabet_(alphabet), width_(width) {
  if (depth < 1 || alphabet < 1 || width < 1)
    throw ContractViolation("MlpValueNet: depth, alphabet and width must be >= 1");
  params_.assign(b2() + 1, 0.0);
  Rng rng(seed);
  auto sym = [&](double bound) { return (2.0 * rng.uniform() - 1.0) * bound; };
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(depth * alphabet));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(width));
  for (int j = 0; j < width_; ++j)
    for (int i = 0; i < depth_ * alphabet_; ++i)
      params_[w1(j, i)] = sym(in_bound);
  for (int j = 0; j < width_; ++j)
    params_[b1(j)] = sym(in_bound);
  for (int j = 0; j < width_; ++j)
    params_[w2(j)] = sym(out_bound);
  params_[b2()] = sym(out_bound);
}

std::vector<double> MlpValueNet::features(const Seq& y) const {
  std::vector<double> x(static_cast<std::size_t>(depth_ * alphabet_), 0.0);
  for (int i = 0; i < depth_; ++i)
    x[static_cast<std::size_t>(i * alphabet_ + y[static_cast<std::size_t>(i)])] = 1.0;
  return x;
}

double MlpValueNet::logit(const Seq& y) const {
  if (static_cast<int>(y.size()) < depth_)
    throw ContractViolation("MlpValueNet: sequence shorter than the net's depth");
  double z = params_[b2()];
  for (int j = 0; j < width_; ++j) {
    double hj = params_[b1(j)];
    for (int i = 0; i < depth_; ++i)
      hj += params_[w1(j, i * alphabet_ + y[static_cast<std::size_t>(i)])];
    if (hj > 0.0)
      z += params_[w2(j)] * hj;
  }
  return z;
}

double MlpValueNet::forward(const Seq& y) const {
  const double z = logit(y);
  return 1.0 / (1.0 + std::exp(-z));
}

double MlpValueNet::loss_and_grad(const std::vector<Example>& batch, Loss loss,
                                  std::vector<double>* grad) const {
  if (grad)
    grad->assign(params_.size(), 0.0);
  std::vector<double> hidden(static_cast<std::size_t>(width_));
  double total = 0.0, count = 0.0;
  for (const Example& ex : batch) {
    double z = params_[b2()];
    for (int j = 0; j < width_; ++j) {
      double hj = params_[b1(j)];
      for (int i = 0; i < depth_; ++i)
        hj += params_[w1(j, i * alphabet_ + ex.prefix[static_cast<std::size_t>(i)])];
      hidden[static_cast<std::size_t>(j)] = hj > 0.0 ? hj : 0.0;
      z += params_[w2(j)] * hidden[static_cast<std::size_t>(j)];
    }
    const double p = 1.0 / (1.0 + std::exp(-z));
    double dz;
    if (loss == Loss::bce) {
      // log p and log(1 - p) from the logit to stay finite.
      const double lp = -std::log1p(std::exp(-z));
      const double lq = -z + lp;
      total += -(ex.s * lp + (ex.n - ex.s) * lq);
      dz = ex.n * p - ex.s;
    } else {
      total += ex.n * p * p - 2.0 * p * ex.s + ex.q;
      dz = 2.0 * (ex.n * p - ex.s) * p * (1.0 - p);
    }
    count += ex.n;
    if (!grad)
      continue;
    auto& g = *grad;
    g[b2()] += dz;
    for (int j = 0; j < width_; ++j) {
      const double hj = hidden[static_cast<std::size_t>(j)];
      g[w2(j)] += dz * hj;
      if (hj > 0.0) {
        const double dh = dz * params_[w2(j)];
        g[b1(j)] += dh;
        for (int i = 0; i < depth_; ++i)
          g[w1(j, i * alphabet_ + ex.prefix[static_cast<std::size_t>(i)])] += dh;
      }
    }
  }
  if (!(count > 0.0))
    throw TrainingError("empty batch");
  if (grad)
    for (double& x : *grad)
      x /= count;
  return total / count;
}

// ---------------------------------------------------------------------------

namespace {

struct Adam {
  std::vector<double> m, v;
  long t = 0;
  void step(std::vector<double>& p, std::vector<double>& g, const TrainConfig& c) {
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    ++t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + c.weight_decay * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      p[i] -= c.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.adam_eps);
    }
  }
};

std::vector<Example> aggregate(const RolloutDataset& data, int h) {
  std::map<Seq, Example> groups;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Seq key(data.leaves[k].begin(), data.leaves[k].begin() + h);
    auto [it, fresh] = groups.try_emplace(key);
    Example& e = it->second;
    if (fresh) {
      e.prefix = key;
      e.n = 0.0;
    }
    const double y = data.labels[k];
    e.n += 1.0;
    e.s += y;
    e.q += y * y;
  }
  std::vector<Example> out;
  out.reserve(groups.size());
  for (auto& [k, e] : groups)
    out.push_back(std::move(e));
  return out;
}

} // namespace

TrainedNet train_value_net(const RolloutDataset& data, int h, const TrainConfig& cfg) {
  if (data.size() == 0)
    throw TrainingError("train_value_net: empty dataset");
  if (h < 1 || h > data.horizon)
    throw ContractViolation("train_value_net: depth out of range");
  if (cfg.loss == Loss::bce)
    for (double y : data.labels)
      if (y < 0.0 || y > 1.0)
        throw TrainingError("train_value_net: cross-entropy needs labels in [0, 1]");
  auto net = std::make_shared<MlpValueNet>(h, data.alphabet, cfg.width,
                                           derive_seed(cfg.seed, static_cast<std::uint64_t>(h)));
  TrainedNet out;
  Adam opt;
  std::vector<double> grad;
  if (cfg.batch_size == 0) {
    const std::vector<Example> batch = aggregate(data, h);
    for (int s = 0; s < cfg.steps; ++s) {
      out.loss_curve.push_back(net->loss_and_grad(batch, cfg.loss, &grad));
      opt.step(net->params(), grad, cfg);
    }
    out.loss_curve.push_back(net->loss_and_grad(batch, cfg.loss, nullptr));
  } else {
    const std::size_t n = data.size();
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    const long per_epoch = static_cast<long>((n + B - 1) / B);
    const long total = cfg.epochs > 0 ? cfg.epochs * per_epoch : cfg.steps;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed ^ 0x5bd1e995u, static_cast<std::uint64_t>(h)));
    std::vector<Example> batch;
    double epoch_loss = 0.0;
    long epoch_batches = 0;
    std::size_t pos = n; // forces a shuffle on the first batch
    for (long b = 0; b < total; ++b) {
      if (pos >= n) {
        for (std::size_t i = n - 1; i > 0; --i)
          std::swap(order[i], order[rng.index(i + 1)]);
        pos = 0;
      }
      batch.clear();
      for (std::size_t i = 0; i < B && pos < n; ++i, ++pos) {
        const std::size_t k = order[pos];
        const double y = data.labels[k];
        batch.push_back({Seq(data.leaves[k].begin(), data.leaves[k].begin() + h), 1.0, y, y * y});
      }
      epoch_loss += net->loss_and_grad(batch, cfg.loss, &grad);
      ++epoch_batches;
      opt.step(net->params(), grad, cfg);
      if (pos >= n || b + 1 == total) {
        out.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_batches));
        epoch_loss = 0.0;
        epoch_batches = 0;
      }
    }
  }
  out.net = std::move(net);
  return out;
}

ValueOracle assemble_trained_oracle(const std::vector<std::shared_ptr<const MlpValueNet>>& nets,
                                    const TiltSpec& tilt, int H, bool use_true_leaf_rewards) {
  const int top = use_true_leaf_rewards ? H - 1 : H;
  for (int h = 1; h <= top; ++h)
    if (static_cast<int>(nets.size()) <= h || !nets[static_cast<std::size_t>(h)])
      throw TrainingError("assembly error: no network for depth " + std::to_string(h));
  return ValueOracle(
      [nets, tilt, H, use_true_leaf_rewards](const Seq& y) {
        const int h = static_cast<int>(y.size());
        if (h == 0)
          return 0.0;
        if (h == H && use_true_leaf_rewards)
          return tilt.log_tau(y);
        return std::log(nets[static_cast<std::size_t>(h)]->forward(y));
      },
      use_true_leaf_rewards, "trained");
}

TrainedBundle train_all_depths(const RolloutDataset& data, const TiltSpec& tilt,
                               const TrainConfig& cfg, bool use_true_leaf_rewards, int jobs) {
  const int H = data.horizon;
  const int top = use_true_leaf_rewards ? H - 1 : H;
  TrainedBundle b;
  b.config = cfg;
  b.true_leaves = use_true_leaf_rewards;
  b.nets.resize(static_cast<std::size_t>(H) + 1);
  b.loss_curves.resize(static_cast<std::size_t>(H) + 1);
  std::atomic<int> next{1};
  auto worker = [&]() {
    for (int h = next++; h <= top; h = next++) {
      TrainedNet t = train_value_net(data, h, cfg);
      b.nets[static_cast<std::size_t>(h)] = t.net;
      b.loss_curves[static_cast<std::size_t>(h)] = std::move(t.loss_curve);
    }
  };
  const int n = std::max(1, std::min(jobs, top));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex fail_mu;
  for (int i = 0; i < n; ++i)
    pool.emplace_back([&]() {
      try {
        worker();
      } catch (...) {
        std::lock_guard lock(fail_mu);
        failure = std::current_exception();
        next = top + 1;
      }
    });
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
  b.oracle = memoized(assemble_trained_oracle(b.nets, tilt, H, use_true_leaf_rewards));
  return b;
}

// ---------------------------------------------------------------------------

namespace {

void put_f64(std::ostream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

double get_f64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8))
    throw TrainingError("load_bundle: truncated parameter block");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i)
    bits = (bits << 8) | buf[i];
  return std::bit_cast<double>(bits);
}

} // namespace

void save_bundle(const std::string& path, const TrainedBundle& bundle) {
  using nlohmann::json;
  json hdr;
  hdr["format"] = "vgb-mlp";
  hdr["version"] = 1;
  hdr["true_leaves"] = bundle.true_leaves;
  const auto& c = bundle.config;
  hdr["config"] = {{"width", c.width},         {"lr", c.lr},
                   {"loss", c.loss == Loss::bce ? "bce" : "mse"},
                   {"batch_size", c.batch_size}, {"steps", c.steps},
                   {"epochs", c.epochs},         {"weight_decay", c.weight_decay},
                   {"seed", c.seed}};
  json nets = json::array();
  for (std::size_t h = 0; h < bundle.nets.size(); ++h) {
    if (!bundle.nets[h])
      continue;
    const auto& n = *bundle.nets[h];
    nets.push_back({{"depth", n.depth()},
                    {"alphabet", n.alphabet()},
                    {"width", n.width()},
                    {"count", n.params().size()}});
  }
  hdr["nets"] = nets;
  hdr["horizon"] = bundle.nets.empty() ? 0 : bundle.nets.size() - 1;
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw TrainingError("save_bundle: cannot open " + path);
  os << hdr.dump() << '\n';
  for (const auto& n : bundle.nets)
    if (n)
      for (double x : n->params())
        put_f64(os, x);
  if (!os)
    throw TrainingError("save_bundle: write failed for " + path);
}

TrainedBundle load_bundle(const std::string& path, const TiltSpec& tilt) {
  using nlohmann::json;
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw TrainingError("load_bundle: cannot open " + path);
  std::string line;
  std::getline(is, line);
  json hdr;
  try {
    hdr = json::parse(line);
  } catch (const json::exception& e) {
    throw TrainingError(std::string("load_bundle: bad header: ") + e.what());
  }
  if (hdr.value("format", "") != "vgb-mlp")
    throw TrainingError("load_bundle: not a value-net bundle");
  TrainedBundle b;
  b.true_leaves = hdr.at("true_leaves").get<bool>();
  const auto& c = hdr.at("config");
  b.config.width = c.at("width");
  b.config.lr = c.at("lr");
  b.config.loss = c.at("loss") == "bce" ? Loss::bce : Loss::mse;
  b.config.batch_size = c.at("batch_size");
  b.config.steps = c.at("steps");
  b.config.epochs = c.at("epochs");
  b.config.weight_decay = c.at("weight_decay");
  b.config.seed = c.at("seed");
  const int H = hdr.at("horizon");
  b.nets.resize(static_cast<std::size_t>(H) + 1);
  b.loss_curves.resize(static_cast<std::size_t>(H) + 1);
  for (const auto& n : hdr.at("nets")) {
    auto net = std::make_shared<MlpValueNet>(n.at("depth").get<int>(), n.at("alphabet").get<int>(),
                                             n.at("width").get<int>(), 0);
    if (net->params().size() != n.at("count").get<std::size_t>())
      throw TrainingError("load_bundle: parameter count mismatch");
    for (double& x : net->params())
      x = get_f64(is);
    b.nets[static_cast<std::size_t>(net->depth())] = net;
  }
  b.oracle = memoized(assemble_trained_oracle(b.nets, tilt, H, b.true_leaves));
  return b;
}

} // namespace vgb
