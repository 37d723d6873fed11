#include "vgb/rng.hpp"

#include "vgb/errors.hpp"

namespace vgb {

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix(splitmix(master) ^ splitmix(index + 0x632be59bd9b4e019ULL));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0)
    throw ContractViolation("Rng::index: empty range");
  // Reject the biased tail so the modulo is exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0)
      throw ContractViolation("Rng::categorical: negative weight");
    total += w;
  }
  if (!(total > 0.0))
    return -1;
  double u = uniform() * total;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0)
      continue;
    last_positive = static_cast<int>(i);
    if (u < weights[i])
      return last_positive;
    u -= weights[i];
  }
  return last_positive;
}

} // namespace vgb
