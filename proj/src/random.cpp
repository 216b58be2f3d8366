#include "plr/random.hpp"

#include <cmath>
#include <numbers>

#include "plr/errors.hpp"

namespace plr {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double RandomSource::uniform_open() {
  // 53 random bits, shifted by half an ulp so both endpoints are excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RandomSource::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("uniform_index: bound must be positive");
  // Rejection sampling avoids modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double RandomSource::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RandomSource::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("categorical: weights must be finite and >= 0");
    total += w;
  }
  if (weights.empty() || total <= 0.0) throw InvalidArgument("categorical: weights must have positive sum");
  const double u = uniform_open() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  // Rounding left u just above the final partial sum.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

RandomSource RandomSource::split(std::uint64_t stream) const {
  return RandomSource(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

}  // namespace plr
