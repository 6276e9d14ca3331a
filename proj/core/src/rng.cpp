#include "tripath/rng.hpp"

#include <cmath>
#include <numbers>

namespace tripath {

namespace {

double to_unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double box_muller(double u1, double u2) noexcept {
  // u1 in (0, 1] keeps the log finite.
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::uint64_t hash64(std::string_view text, std::uint64_t seed) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ mix64(seed);
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix64(h);
}

double Rng::uniform() noexcept { return to_unit_interval(next_u64()); }

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() noexcept {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return box_muller(u1, u2);
}

double counter_normal(std::uint64_t key, std::uint64_t counter) noexcept {
  const double u1 = 1.0 - to_unit_interval(mix64(key ^ mix64(2 * counter)));
  const double u2 = to_unit_interval(mix64(key ^ mix64(2 * counter + 1)));
  return box_muller(u1, u2);
}

}  // namespace tripath
