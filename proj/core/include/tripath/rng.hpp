#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace tripath {

/// splitmix64 finalizer; also used as a counter-based generator.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a over the bytes of `text`, keyed by `seed`.
std::uint64_t hash64(std::string_view text, std::uint64_t seed) noexcept;

/// Portable deterministic generator. Every draw is defined here rather than
/// through <random> distributions, whose output differs between standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Counter-based normal draw: the `counter`-th standard normal of stream `key`.
double counter_normal(std::uint64_t key, std::uint64_t counter) noexcept;

}  // namespace tripath
