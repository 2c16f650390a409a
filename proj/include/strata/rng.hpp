#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace strata {

/// Counter-based deterministic generator.
///
/// Output i is splitmix64_mix(key + (i+1) * 0x9E3779B97F4A7C15). The mix
/// function is the finalizer from SplitMix64 (Steele et al.). Because the
/// state is (key, counter) the stream is reproducible across platforms and
/// independent of call-site interleaving; child streams are derived by
/// hashing the parent key with a stream tag.
class Rng {
public:
  explicit Rng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform in [0,1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0,n). Uses rejection to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Standard normal via Box-Muller on two fresh uniforms.
  double next_gaussian() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  /// Fisher-Yates shuffle, deterministic for a given stream position.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Child key for a named substream, e.g. derive(seed, "tile", 17).
  static std::uint64_t derive(std::uint64_t key, std::string_view tag,
                              std::uint64_t index = 0) {
    std::uint64_t h = key ^ 0xA0761D6478BD642Full;
    for (const char c : tag) h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return mix(h ^ mix(index + 0x8BB84B93962EACC9ull));
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

} // namespace strata
