#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tsde {

// Stream-splitting for reproducible replications: the same (root, stream)
// pair always yields the same child seed, and distinct streams are decorrelated
// by a splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t substream);

// Thin wrapper around mt19937_64. Uniform doubles are built from the top 53
// bits directly so draws do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Index drawn with probability proportional to `weights` (assumed to sum to
  // one up to rounding; the last positive entry absorbs the remainder).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace tsde
