#include "imloc/rng.hpp"

#include <cmath>
#include <numbers>

namespace imloc {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::uint64_t Rng::next_u64() noexcept {
  return mix64(mix64(seed_) ^ mix64(counter_++ + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(next_u64() % span);
}

double Rng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::string_view key) const noexcept { return derive(hash_string(key)); }

Rng Rng::derive(std::uint64_t key) const noexcept {
  return Rng(mix64(seed_ ^ mix64(key ^ 0xd1b54a32d192ed03ULL)));
}

namespace {
Rng& global_rng() {
  static Rng rng(0);
  return rng;
}
}  // namespace

Rng seed_all(std::uint64_t seed) {
  global_rng() = Rng(seed);
  return Rng(seed);
}

Rng& default_rng() { return global_rng(); }

}  // namespace imloc
