#ifndef DCLM_RNG_HPP
#define DCLM_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace dclm {

// All randomness flows through mt19937_64 plus the hand-rolled draws below.
// std::uniform_*_distribution and std::shuffle are implementation-defined;
// owning the mapping keeps runs reproducible across standard libraries.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + uniform01(rng) * (hi - lo);
}

// Uniform integer in [0, n) via rejection sampling, bias-free.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

template <typename T>
void fisher_yates(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(xs[i - 1], xs[j]);
  }
}

// splitmix64; used to derive independent per-stream seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dclm

#endif  // DCLM_RNG_HPP
