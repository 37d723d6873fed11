#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "vgb/errors.hpp"
#include "vgb/tasks.hpp"
#include "vgb/training.hpp"

using namespace vgb;

namespace {

std::string dump(const RolloutDataset& d) {
  std::ostringstream os;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int a : d.leaves[i])
      os << a;
    os << ':' << d.labels[i] << '\n';
  }
  return os.str();
}

bool has_c(const Seq& y) { return std::find(y.begin(), y.end(), 2) != y.end(); }

} // namespace

TEST_CASE("rollouts") {
  const auto t = abc_task(6, 0.0);
  CHECK(generate_rollouts(*t.model, t.tilt, 0, 1).size() == 0);

  const auto d = generate_rollouts(*t.model, t.tilt, 100000, 3);
  double ones = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.leaves[i].size() == 6u);
    ones += d.labels[i];
  }
  const double p = std::pow(2.0 / 3.0, 6);
  const double n = static_cast<double>(d.size());
  CHECK(std::abs(ones - n * p) <= 4 * std::sqrt(n * p * (1 - p)));

  CHECK(dump(generate_rollouts(*t.model, t.tilt, 500, 9)) == dump(generate_rollouts(*t.model, t.tilt, 500, 9)));
  CHECK(dump(generate_rollouts(*t.model, t.tilt, 500, 9)) != dump(generate_rollouts(*t.model, t.tilt, 500, 10)));
}

TEST_CASE("constant labels are fitted by both losses") {
  const auto t = abc_task(3, 0.0);
  auto d = generate_rollouts(*t.model, t.tilt, 2000, 5);
  for (double& y : d.labels)
    y = 0.3;
  for (Loss loss : {Loss::bce, Loss::mse}) {
    TrainConfig cfg = TrainConfig::abc();
    cfg.loss = loss;
    if (loss == Loss::mse)
      cfg.steps = 300; // the squared loss has a flatter gradient near the optimum
    const auto net = train_value_net(d, 2, cfg).net;
    double worst = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        worst = std::max(worst, std::abs(net->forward({a, b}) - 0.3));
    CHECK(worst <= 0.02);
  }
}

TEST_CASE("abc depth-5 net is close to the exact value") {
  const int H = 6;
  const auto t = abc_task(H, 0.0);
  const auto d = generate_rollouts(*t.model, t.tilt, 10000, 17);
  const auto net = train_value_net(d, 5, TrainConfig::abc()).net;
  double err = 0.0;
  int count = 0;
  for_each_node(*t.model, [&](const Seq& y, double) {
    if (y.size() == 5 && !has_c(y)) {
      err += std::abs(net->forward(y) - 2.0 / 3.0);
      ++count;
    }
    return y.size() < 5 && !has_c(y);
  });
  CHECK(count == 32);
  CHECK(err / count <= 0.05);
}

TEST_CASE("gradient matches central differences") {
  const auto t = abc_task(4, 0.0);
  const auto d = generate_rollouts(*t.model, t.tilt, 200, 2);
  std::vector<Example> batch;
  for (std::size_t i = 0; i < 40; ++i)
    batch.push_back({Seq(d.leaves[i].begin(), d.leaves[i].begin() + 3), 1.0, d.labels[i] * 0.8 + 0.1,
                     0.0});
  for (auto& e : batch)
    e.q = e.s * e.s;
  for (Loss loss : {Loss::bce, Loss::mse}) {
    MlpValueNet net(3, 3, 16, 4);
    std::vector<double> g;
    net.loss_and_grad(batch, loss, &g);
    Rng rng(8);
    for (int k = 0; k < 10; ++k) {
      const std::size_t i = rng.index(net.params().size());
      const double x = net.params()[i];
      const double step = 1e-5;
      net.params()[i] = x + step;
      const double up = net.loss_and_grad(batch, loss, nullptr);
      net.params()[i] = x - step;
      const double down = net.loss_and_grad(batch, loss, nullptr);
      net.params()[i] = x;
      const double fd = (up - down) / (2 * step);
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
  }
}

TEST_CASE("network properties") {
  MlpValueNet net(3, 3, 8, 1);
  const Seq y{2, 0, 1};
  CHECK(net.forward(y) == net.forward(y));
  CHECK(net.forward(y) > 0.0);
  CHECK(net.forward(y) < 1.0);
  std::set<std::vector<double>> feats;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        feats.insert(net.features({a, b, c}));
  CHECK(feats.size() == 27u);
}

TEST_CASE("training errors") {
  const auto t = abc_task(3, 0.0);
  RolloutDataset empty;
  empty.horizon = 3;
  empty.alphabet = 3;
  CHECK_THROWS_AS(train_value_net(empty, 1, TrainConfig::abc()), TrainingError);
  auto d = generate_rollouts(*t.model, t.tilt, 10, 1);
  d.labels[0] = 2.0;
  CHECK_THROWS_AS(train_value_net(d, 1, TrainConfig::abc()), TrainingError);
  CHECK_THROWS_AS(assemble_trained_oracle({nullptr, nullptr}, t.tilt, 3, true), TrainingError);
}

TEST_CASE("trained abc oracle: loss curve, true leaves, error profile") {
  const int H = 5;
  const auto t = abc_task(H, 0.0);
  const auto d = generate_rollouts(*t.model, t.tilt, 10000, 23);
  const auto b = train_all_depths(d, t.tilt, TrainConfig::abc(), true, 2);

  int transitions = 0, non_increasing = 0;
  for (int h = 1; h < H; ++h) {
    const auto& c = b.loss_curves[static_cast<std::size_t>(h)];
    CHECK(c.size() == 101u);
    for (std::size_t i = 1; i < c.size(); ++i) {
      ++transitions;
      non_increasing += c[i] <= c[i - 1] + 1e-15;
    }
  }
  CHECK(non_increasing >= 0.95 * transitions);

  CHECK(b.oracle.value({0, 1, 0, 1, 1}) == 1.0);
  CHECK(b.oracle.value({0, 1, 2, 1, 1}) == 0.0);

  const auto prof = error_profile(*t.model, b.oracle, t.oracle("exact"), t.target());
  for (int h = 1; h < H; ++h) {
    CHECK(prof.avg_over[static_cast<std::size_t>(h)] <= 1.5);
    CHECK(prof.avg_under[static_cast<std::size_t>(h)] <= 1.5);
  }
}

TEST_CASE("without true leaves a depth-H net is trained") {
  const auto t = abc_task(3, 0.0);
  const auto d = generate_rollouts(*t.model, t.tilt, 3000, 4);
  const auto b = train_all_depths(d, t.tilt, TrainConfig::abc(), false);
  REQUIRE(b.nets[3]);
  CHECK_FALSE(b.oracle.exact_at_leaves());
  CHECK(b.oracle.value({0, 1, 0}) > 0.5);
  CHECK(b.oracle.value({0, 1, 2}) < 0.5);
}

TEST_CASE("minibatch recipe records one loss per epoch") {
  const auto t = dyck_task(4, {});
  const auto d = generate_rollouts(*t.model, t.tilt, 320, 6);
  TrainConfig cfg = TrainConfig::dyck();
  cfg.epochs = 3;
  const auto r = train_value_net(d, 2, cfg);
  CHECK(r.loss_curve.size() == 3u);
}

TEST_CASE("bundle round trip") {
  const auto t = abc_task(4, 0.0);
  const auto d = generate_rollouts(*t.model, t.tilt, 2000, 31);
  TrainConfig cfg = TrainConfig::abc();
  cfg.width = 16;
  const auto b = train_all_depths(d, t.tilt, cfg, true);
  const auto path = (std::filesystem::temp_directory_path() / "vgb_bundle_test.bin").string();
  save_bundle(path, b);
  const auto loaded = load_bundle(path, t.tilt);
  for_each_node(*t.model, [&](const Seq& y, double) {
    if (!y.empty())
      CHECK(loaded.oracle.log_value(y) == b.oracle.log_value(y));
    return true;
  });
  std::filesystem::remove(path);

  std::ofstream(path) << "not a bundle\n";
  CHECK_THROWS_AS(load_bundle(path, t.tilt), TrainingError);
  std::filesystem::remove(path);
}
