#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace vgb {

/// Mix a (master seed, stream index) pair into a 64-bit key. Streams for
/// distinct indices are independent for all practical purposes.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Thread-confined random source. Every sampler takes one of these; the
/// harness spawns one per replicate via Rng::stream.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
  }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Draw an index proportionally to nonnegative weights. Returns -1 when all
  /// weights are zero.
  int categorical(std::span<const double> weights);

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

} // namespace vgb
