#ifndef DCSC_RNG_HPP
#define DCSC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dcsc {

// Counter-based Gaussian stream. Draw i of stream `seed` is a pure function of
// (seed, i), so results do not depend on evaluation order or on the standard
// library's distribution implementations:
//
//   word(seed, j) = splitmix64_finalize(seed + (j + 1) * 0x9E3779B97F4A7C15)
//   u1 = ((word(seed, 2i)     >> 11) + 1) * 2^-53      in (0, 1]
//   u2 =  (word(seed, 2i + 1) >> 11)      * 2^-53      in [0, 1)
//   normal(i) = sqrt(-2 ln u1) * cos(2 pi u2)            (Box-Muller)
class CounterGaussian {
 public:
  explicit CounterGaussian(std::uint64_t seed) noexcept : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t word(std::uint64_t counter) const noexcept {
    return mix(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  double normal(std::uint64_t index) const noexcept {
    constexpr double kInv53 = 1.0 / 9007199254740992.0;
    const double u1 = static_cast<double>((word(2 * index) >> 11) + 1) * kInv53;
    const double u2 = static_cast<double>(word(2 * index + 1) >> 11) * kInv53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace dcsc

#endif  // DCSC_RNG_HPP
