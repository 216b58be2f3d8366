#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace plr {

/// Seeded random stream. Built on mt19937_64, whose output sequence is fixed by
/// the standard, and on hand-written transforms so that draws are identical
/// across standard library implementations.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform_open();

  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Standard normal via Box-Muller.
  double normal();

  /// Index drawn with probability proportional to `weights` (nonnegative, positive sum).
  std::size_t categorical(std::span<const double> weights);

  /// Independent child stream; the child seed depends only on (seed, stream).
  RandomSource split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace plr
