#pragma once

// Portable pseudo-random numbers for everything that must be reproducible
// from a recorded seed: split assignment, calibration holdouts, mock
// projections and synthetic fixtures.
//
// Generator: xoshiro256** (Blackman & Vigna), state seeded by four
// successive outputs of splitmix64(seed). Bounded integers use rejection
// sampling on the top bits; doubles take the top 53 bits. Normal deviates
// use the Box-Muller transform without caching the second value. None of
// this goes through <random> distributions, whose outputs differ between
// standard library implementations.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace lesion {

std::uint64_t splitmix64(std::uint64_t& state);

// 64-bit FNV-1a, used to derive sub-seeds from names.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  // Uniform on [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform on [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace lesion
