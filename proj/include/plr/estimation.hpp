#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "plr/permutation.hpp"
#include "plr/pl.hpp"
#include "plr/random.hpp"

namespace plr {

struct EliteMember {
  Permutation pi;
  double score = 0.0;
  double weight = 1.0;
};

/// Scored permutations retained from one CE iteration. Nonempty, shared item
/// count, finite nonnegative weights.
class EliteSet {
 public:
  explicit EliteSet(std::vector<EliteMember> members);

  /// Unweighted set (every weight 1, score 0).
  static EliteSet from_permutations(std::vector<Permutation> perms);

  std::size_t size() const noexcept { return members_.size(); }
  std::size_t num_items() const noexcept { return members_.front().pi.size(); }
  const std::vector<EliteMember>& members() const noexcept { return members_; }
  const EliteMember& operator[](std::size_t m) const { return members_[m]; }

  double total_weight() const;

  /// Same permutations and scores with replaced weights.
  EliteSet with_weights(std::span<const double> weights) const;

  /// Weight each member by its score.
  EliteSet score_weighted() const;

 private:
  std::vector<EliteMember> members_;
};

struct GradientFitConfig {
  int steps = 60;
  double learning_rate = 0.1;
  double l2_penalty = 0.0;
  double clip = kDefaultLogitClip;
};

struct EMAConfig {
  double alpha = 0.7;
  double tau = 1.0;
  double clip = kDefaultLogitClip;
};

/// Heuristic update: blend the logits toward -mean_elite_rank / tau.
PLParams ema_rank_update(const PLParams& params, const EliteSet& elites, const EMAConfig& cfg);

/// clip(center((1 - alpha) * old + alpha * fresh)).
PLParams ema_blend(const PLParams& old, const PLParams& fresh, double alpha, double clip = kDefaultLogitClip);

/// sum_m w_m log Pr(pi_m | theta).
double weighted_log_likelihood(const PLParams& params, const EliteSet& elites);

/// Gradient of weighted_log_likelihood with respect to the logits.
std::vector<double> pl_grad(const PLParams& params, const EliteSet& elites);

/// The MLE objective: weighted log-likelihood minus (l2 / 2) * |theta|^2.
double mle_objective(const PLParams& params, const EliteSet& elites, double l2_penalty);

/// Weighted PL maximum likelihood by Adam ascent from `init`, centering and
/// clipping after every step. Never returns a point with a lower objective than
/// `init`.
PLParams mle_fit(const EliteSet& elites, const PLParams& init, const GradientFitConfig& cfg);

/// r[m][k]: posterior probability that elite m came from component k.
std::vector<std::vector<double>> responsibilities(const MixturePL& mix, const EliteSet& elites);

/// sum_m w_m log q(pi_m) under the mixture.
double mixture_log_likelihood(const MixturePL& mix, const EliteSet& elites);

struct EMResult {
  MixturePL mixture;
  /// Weighted log-likelihood before the first round and after each round.
  std::vector<double> log_likelihood;
};

EMResult em_fit_traced(const EliteSet& elites, const MixturePL& init, const GradientFitConfig& inner, int rounds,
                       double min_weight = kMinComponentWeight);

MixturePL em_fit(const EliteSet& elites, const MixturePL& init, const GradientFitConfig& inner, int rounds,
                 double min_weight = kMinComponentWeight);

/// K components at `base` plus N(0, sigma^2) noise per coordinate, uniform weights.
MixturePL perturbed_mixture(const PLParams& base, std::size_t components, double sigma, RandomSource& rng,
                            double clip = kDefaultLogitClip);

}  // namespace plr
