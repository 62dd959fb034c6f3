#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace owlkit {

/// Counter-based random numbers.
///
/// Every draw is a pure function of a 64-bit key and a 64-bit counter:
///
///     draw(key, n) = mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer. Keys for sub-streams are derived
/// with derive_key(parent, tag) = mix64(parent ^ mix64(tag)). Uniform doubles
/// take the top 53 bits; normals use Box-Muller on two consecutive draws. No
/// hidden state means datasets and shuffles are reproducible from
/// (seed, tag, counter) alone, independent of iteration order.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t draw(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key + (counter + 1) * kGolden);
}

constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent ^ mix64(tag + kGolden));
}

/// Uniform in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform in (0, 1]; safe as a log argument.
constexpr double to_unit_open_low(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

} // namespace rng

/// A sequential view over one counter-based stream.
class CounterStream {
public:
  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept { return rng::draw(key_, counter_++); }
  constexpr double next_unit() noexcept { return rng::to_unit(next_u64()); }

  /// Uniform integer in [0, bound); bound > 0. Uses Lemire-style rejection.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next_u64();
      __extension__ using u128 = unsigned __int128;
      const u128 m = static_cast<u128>(x) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  /// Standard normal via Box-Muller (uses two draws, returns the cosine branch).
  double next_normal() noexcept {
    const double u1 = rng::to_unit_open_low(next_u64());
    const double u2 = rng::to_unit(next_u64());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace owlkit
