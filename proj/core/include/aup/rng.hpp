#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aup {

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence
/// is pinned by the standard) and converts to doubles/ints ourselves so that
/// results are bit-identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1): top 53 bits of the generator output.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform int in [0, n). Rejection sampling, so no modulo bias.
  int next_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

 private:
  std::mt19937_64 gen_;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based seed derivation: child = f(parent, counter). Streams for
/// different counters are independent of how many counters are ever used,
/// so adding trials to a study never perturbs existing ones.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
  return detail::splitmix64(parent ^ (detail::kGolden * (counter + 1)));
}

/// Named sub-stream, e.g. derive_seed(seed, "explore").
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) {
  return detail::splitmix64(parent ^ detail::fnv1a(tag));
}

}  // namespace aup
