#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>

namespace advrat {

// FNV-1a over bytes. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: output n is splitmix64(key + n * golden). Streams
// are derived from (seed, label, index) so results do not depend on the order
// in which instances are processed. All distributions are implemented here
// rather than through <random> so that outputs are bit-identical across
// standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : key_(splitmix64(seed)) {}

  // Independent stream for a named sub-task.
  Rng stream(std::string_view label, std::uint64_t index = 0) const {
    return Rng(splitmix64(key_ ^ fnv1a(label)) ^ splitmix64(index + 0x632be59bd9b4e019ULL),
               0);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (one draw per call, the pair is discarded).
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  Rng(std::uint64_t key, int) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace advrat
