#ifndef BINF_RNG_HPP
#define BINF_RNG_HPP

#include <cstdint>
#include <span>
#include <string_view>

namespace binf {

// Counter-based generator. A stream is a 64-bit key derived from the master
// seed and a chain of substream labels; draws mix (key, counter). Streams are
// cheap value types, so parallel workers derive their own without shared
// mutable state, and the draw sequence depends only on the derivation chain.
class RngStream {
 public:
  RngStream() : key_(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  RngStream sub(std::uint64_t salt) const { return RngStream(mix(key_, salt ^ 0xa5a5a5a5a5a5a5a5ULL)); }
  RngStream sub(std::string_view label) const { return RngStream(mix(key_, fnv1a(label))); }

  std::uint64_t next_u64() { return mix(key_, ++counter_); }

  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [0, bound)
  std::uint64_t next_below(std::uint64_t bound) { return bound <= 1 ? 0 : next_u64() % bound; }

  // inverse-CDF draw from a nonnegative weight row (need not be normalized)
  int sample(std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    double u = next_unit() * total;
    double acc = 0;
    int last = 0;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] <= 0) continue;
      acc += weights[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace binf

#endif
