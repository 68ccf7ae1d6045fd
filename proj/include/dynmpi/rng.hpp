#ifndef DYNMPI_RNG_HPP
#define DYNMPI_RNG_HPP

#include <cmath>
#include <cstdint>

namespace dynmpi::rng {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so streams are reproducible across platforms and thread schedules.
// Core mixer is splitmix64.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + counter * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in the open interval (0,1).
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  return (static_cast<double>(mix(seed, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller; one value per counter.
inline double gaussian(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = uniform01(seed, 2 * counter);
  const double u2 = uniform01(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Convenience sequential stream over the counter space.
class Stream {
public:
  explicit Stream(std::uint64_t seed, std::uint64_t start = 0) : seed_(seed), counter_(start) {}

  std::uint64_t next_u64() { return mix(seed_, counter_++); }
  double next_uniform() { return uniform01(seed_, counter_++); }
  double next_gaussian() { return gaussian(seed_, counter_++); }
  // Uniform integer in [0, n). Modulo bias is negligible for the small n used here.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace dynmpi::rng

#endif
