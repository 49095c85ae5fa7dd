#pragma once

#include <array>
#include <cstdint>

namespace cstoc {

/// Philox4x32-10 counter-based generator. Stateless: each call maps
/// (key, counter) to four 32-bit words, so parallel workers can draw
/// non-overlapping streams without shared state.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Deterministic stream of Brownian-increment normals addressed by
/// (seed, path index, step index, coordinate). The same address always
/// yields the same value, independent of evaluation order or thread count.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : seed_(seed) {}

  /// Standard normal at the given address; coordinates 2b and 2b+1 share one
  /// counter block (Box-Muller pair).
  double normal(std::uint64_t path, std::uint32_t step, std::uint32_t coord) const;

  /// Uniform in (0,1) at the given address (distinct stream from normal()).
  double uniform(std::uint64_t path, std::uint32_t step, std::uint32_t coord) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Small deterministic 64-bit mixer for seeding and hashing (splitmix64).
std::uint64_t mix64(std::uint64_t v);

}  // namespace cstoc
