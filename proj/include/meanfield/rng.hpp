#ifndef MEANFIELD_RNG_HPP
#define MEANFIELD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace meanfield {

// Counter-based RNG: every draw is a pure function of a 64-bit key and a
// counter tuple, so parallel generation is order-independent and runs are
// reproducible bit-for-bit. Mixing is splitmix64 applied to the combined
// words ("splitmix64-counter", version 1; the trajectory header version
// pins it).
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t h = splitmix64(key);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return h;
}

// Uniform in (0,1]; never returns 0 so log() below is safe.
inline double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0, std::uint64_t d = 0) {
  return to_unit(mix(key, a, b, c, d));
}

// Standard normal via Box-Muller on two counter draws.
inline double normal(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0, std::uint64_t d = 0) {
  const double u1 = to_unit(mix(key, a, b, c, 2 * d));
  const double u2 = to_unit(mix(key, a, b, c, 2 * d + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential stream for shuffles and projection sampling, where an ordered
// consumer is the natural fit. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }
  result_type operator()() {
    state_ += kGolden;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  double uniform() { return to_unit((*this)()); }
  double normal() {
    const double u1 = to_unit((*this)());
    const double u2 = to_unit((*this)());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rng
}  // namespace meanfield

#endif
