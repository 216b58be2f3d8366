#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "plr/permutation.hpp"
#include "plr/pl.hpp"
#include "plr/scoring.hpp"

namespace plr {

inline constexpr std::size_t kMaxEnumerationItems = 8;

/// Probability table over all n! permutations, indexed in lexicographic order.
class ExactDistribution {
 public:
  /// Validates n <= 8, table size n!, nonnegative entries summing to 1 (1e-10).
  ExactDistribution(std::size_t n, std::vector<double> probs);

  std::size_t num_items() const noexcept { return n_; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probabilities() const& noexcept { return probs_; }
  std::span<const double> probabilities() const&& = delete;
  double operator[](std::size_t idx) const { return probs_[idx]; }
  double probability(const Permutation& pi) const;

 private:
  std::size_t n_;
  std::vector<double> probs_;
};

/// All permutations of {0..n-1} in lexicographic order.
std::vector<Permutation> all_permutations(std::size_t n);

/// Lexicographic index of pi among all permutations of its size.
std::size_t permutation_index(const Permutation& pi);

ExactDistribution enumerate_pl(const PLParams& params);
ExactDistribution enumerate_mixture(const MixturePL& mix);

/// Empirical frequencies of `samples`.
ExactDistribution empirical_distribution(std::size_t n, std::span<const Permutation> samples);

/// Half the l1 distance.
double total_variation(const ExactDistribution& p, const ExactDistribution& q);

/// One near-degenerate PL component per support point of `target`, weighted by
/// its target mass. Guarantees (by enumeration) TV(mixture, target) < epsilon.
MixturePL construct_dense_mixture(const ExactDistribution& target, double epsilon);

struct SinglePLFit {
  PLParams params;
  double tv = 1.0;
};

/// Best single PL approximation in total variation, by multi-start coordinate search.
SinglePLFit best_single_pl_fit(const ExactDistribution& target);

/// Scores every permutation; ties go to the lexicographically smallest.
std::pair<Permutation, double> exhaustive_argmax(ScoreFunction& scorer, std::size_t n,
                                                 std::span<const LabeledExample> dataset);

/// Spearman rank correlation with average ranks for ties.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace plr
