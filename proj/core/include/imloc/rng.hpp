#pragma once

#include <cstdint>
#include <string_view>

namespace imloc {

/// Counter-based generator: draw i is a pure function of (seed, i), so
/// streams can be derived and replayed without shared state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Independent child stream keyed by a label (e.g. a sample id).
  Rng derive(std::string_view key) const noexcept;
  Rng derive(std::uint64_t key) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_string(std::string_view s) noexcept;

/// Seeds and installs the process-wide default generator.
Rng seed_all(std::uint64_t seed);
Rng& default_rng();

}  // namespace imloc
