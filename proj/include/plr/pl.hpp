#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "plr/permutation.hpp"
#include "plr/random.hpp"

namespace plr {

inline constexpr double kDefaultLogitClip = 20.0;
inline constexpr double kMinComponentWeight = 1e-3;

/// Plackett-Luce logits over n items. Values are immutable; every update
/// returns a new object.
class PLParams {
 public:
  explicit PLParams(std::vector<double> logits);

  static PLParams uniform(std::size_t n) { return PLParams(std::vector<double>(n, 0.0)); }

  std::size_t size() const noexcept { return logits_.size(); }
  double operator[](std::size_t i) const { return logits_[i]; }
  std::span<const double> logits() const noexcept { return logits_; }
  const std::vector<double>& vector() const noexcept { return logits_; }

  friend bool operator==(const PLParams&, const PLParams&) = default;

 private:
  std::vector<double> logits_;
};

/// Convex combination of PL components sharing one item set.
/// Weights sum to 1 and each is at least `min_weight`.
class MixturePL {
 public:
  MixturePL(std::vector<double> weights, std::vector<PLParams> components,
            double min_weight = kMinComponentWeight);

  static MixturePL single(PLParams params);

  std::size_t num_components() const noexcept { return components_.size(); }
  std::size_t num_items() const noexcept { return components_.front().size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  const std::vector<PLParams>& components() const noexcept { return components_; }
  const PLParams& component(std::size_t k) const { return components_[k]; }

  friend bool operator==(const MixturePL&, const MixturePL&) = default;

 private:
  std::vector<double> weights_;
  std::vector<PLParams> components_;
};

/// log(sum(exp(x))) without overflow; -inf for an empty span.
double logsumexp(std::span<const double> x);

/// Exact log Pr(pi | theta) in nats.
double log_prob(const PLParams& params, const Permutation& pi);

/// One PL draw by Gumbel perturb-and-sort.
Permutation sample(const PLParams& params, RandomSource& rng);

std::vector<Permutation> sample_batch(const PLParams& params, std::size_t count, RandomSource& rng);

/// Subtracts the mean logit.
PLParams center(const PLParams& params);

/// Centers, then clips to [-clip, clip]. When clipping binds the result is
/// left as clipped (no second centering pass).
PLParams center_and_clip(std::span<const double> logits, double clip);

/// The most probable ordering: items by descending logit.
Permutation mode(const PLParams& params);

double mixture_log_prob(const MixturePL& mix, const Permutation& pi);

Permutation mixture_sample(const MixturePL& mix, RandomSource& rng);

/// Pr(next = a | prefix) / Pr(next = b | prefix) evaluated from the sequential
/// choice form. Equal to exp(theta_a - theta_b) for every admissible prefix.
double iia_choice_ratio(const PLParams& params, int a, int b, std::span<const int> prefix);

/// Floors every weight at `min_weight` and rescales the remaining ones so the
/// total is 1. Requires weights.size() * min_weight <= 1.
std::vector<double> floor_and_normalize(std::span<const double> weights, double min_weight);

}  // namespace plr
