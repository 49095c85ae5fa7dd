#include "cstoc/rng.hpp"

#include <cmath>

namespace cstoc {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM4x32A, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM4x32B, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW32A;
    key[1] += kPhiloxW32B;
  }
  return ctr;
}

namespace {

/// Two uniforms in (0,1) from one Philox block; 53-bit mantissas, offset so
/// the result is never exactly 0 or 1.
inline void block_uniforms(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                           std::uint32_t block, std::uint32_t stream, double& u1,
                           double& u2) {
  const std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(path),
      static_cast<std::uint32_t>(path >> 32),
      step,
      block ^ (stream << 30),
  };
  const std::array<std::uint32_t, 2> key{
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32),
  };
  const auto r = philox4x32(ctr, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
  u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double NormalStream::normal(std::uint64_t path, std::uint32_t step,
                            std::uint32_t coord) const {
  double u1, u2;
  block_uniforms(seed_, path, step, coord / 2, /*stream=*/0, u1, u2);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  return coord % 2 == 0 ? r * std::cos(theta) : r * std::sin(theta);
}

double NormalStream::uniform(std::uint64_t path, std::uint32_t step,
                             std::uint32_t coord) const {
  double u1, u2;
  block_uniforms(seed_, path, step, coord / 2, /*stream=*/1, u1, u2);
  return coord % 2 == 0 ? u1 : u2;
}

std::uint64_t mix64(std::uint64_t v) {
  v += 0x9E3779B97F4A7C15ull;
  v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ull;
  v = (v ^ (v >> 27)) * 0x94D049BB133111EBull;
  return v ^ (v >> 31);
}

}  // namespace cstoc
