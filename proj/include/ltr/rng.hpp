#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ltr {

/// FNV-1a 64-bit hash. Also the stated hash for OOV token bucketing, so it
/// must stay byte-for-byte stable across platforms.
constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {
constexpr uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

/// Deterministic, platform-independent PRNG (xoshiro256**).
///
/// Streams are derived by key, not by position: fork("dropout", worker, step)
/// always yields the same stream no matter how much the parent was consumed.
/// Keying substreams by step means nothing about stream position has to be
/// persisted; the global step in a checkpoint pins every stream.
class Rng {
 public:
  explicit Rng(uint64_t key) : key_(key) {
    uint64_t x = key;
    for (auto& w : state_) w = detail::splitmix64(x);
  }

  Rng fork(std::string_view label) const { return Rng(mix(key_, fnv1a64(label))); }
  Rng fork(std::string_view label, uint64_t a) const {
    return Rng(mix(mix(key_, fnv1a64(label)), a));
  }
  Rng fork(std::string_view label, uint64_t a, uint64_t b) const {
    return Rng(mix(mix(mix(key_, fnv1a64(label)), a), b));
  }

  uint64_t next_u64() {
    const uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller (two uniforms per call).
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Uniform integer in [0, n). Multiply-shift; biased by < 2^-64, fine here.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t key() const { return key_; }

 private:
  static constexpr uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a ^ detail::rotl(b, 23) ^ 0xA3EC647659359ACDULL;
    return detail::splitmix64(x);
  }

  uint64_t key_;
  std::array<uint64_t, 4> state_;
};

}  // namespace ltr
