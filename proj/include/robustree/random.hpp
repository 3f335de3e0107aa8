#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace robustree {

// All randomness flows through explicitly passed engines. The helpers below
// avoid the std distributions so that streams are bit-identical across
// standard library implementations.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child stream addressed by a stable path of indices below a master seed.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return Rng{h};
}

// Uniform in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi]; returns lo exactly when lo == hi.
inline double uniform_real(Rng& rng, double lo, double hi) {
  const double v = lo + (hi - lo) * uniform01(rng);
  return v > hi ? hi : v;
}

// Uniform in [0, n), n > 0, without modulo bias.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

// Uniform in [lo, hi] inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo) + 1));
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace robustree
