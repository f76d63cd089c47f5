#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>

namespace hf {

// Seeded generator with explicitly defined transforms, so that sequences do
// not depend on the standard library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);

  // Standard normal via the Marsaglia polar method.
  double normal();

  // Laplace(0, scale) via inverse CDF.
  double laplace(double scale);

  // Deterministically derived child generator.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

} // namespace hf
