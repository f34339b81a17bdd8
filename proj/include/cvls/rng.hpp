#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cvls {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seeded random stream with hand-rolled transforms. std::* distributions are
/// implementation-defined, so every draw here is spelled out explicitly and
/// produces the same sequence on any conforming platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  /// Stream derived from (seed, tag, index) so independent purposes never
  /// share draws. Same inputs, same stream.
  static RngStream derive(std::uint64_t seed, std::string_view tag,
                          std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return RngStream(splitmix64(seed ^ splitmix64(h ^ (index * 0x9e3779b97f4a7c15ull))));
  }

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Multiply-shift, no rejection loop.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Inverse-CDF exponential sample with the given rate.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  /// Box-Muller standard normal (second value cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], log stays finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  template <typename V>
  void shuffle(V& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cvls
