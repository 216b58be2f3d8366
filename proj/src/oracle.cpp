#include "plr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "plr/errors.hpp"
#include "plr/random.hpp"

namespace plr {

namespace {

std::size_t factorial(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

void require_enumerable(std::size_t n) {
  if (n == 0) throw InvalidArgument("enumeration needs at least one item");
  if (n > kMaxEnumerationItems) {
    throw CapacityError("exact enumeration is capped at " + std::to_string(kMaxEnumerationItems) + " items, got " +
                        std::to_string(n));
  }
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

ExactDistribution::ExactDistribution(std::size_t n, std::vector<double> probs) : n_(n), probs_(std::move(probs)) {
  require_enumerable(n_);
  if (probs_.size() != factorial(n_)) throw InvalidArgument("distribution table must have n! entries");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) throw InvalidArgument("probabilities must sum to 1");
}

double ExactDistribution::probability(const Permutation& pi) const {
  if (pi.size() != n_) throw InvalidArgument("permutation size does not match distribution");
  return probs_[permutation_index(pi)];
}

std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<Permutation> out;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  do {
    out.emplace_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

std::size_t permutation_index(const Permutation& pi) {
  // Lehmer code.
  const std::size_t n = pi.size();
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t smaller_after = 0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pi[j] < pi[i]) ++smaller_after;
    }
    idx += smaller_after * factorial(n - 1 - i);
  }
  return idx;
}

ExactDistribution enumerate_pl(const PLParams& params) {
  require_enumerable(params.size());
  std::vector<double> probs;
  for (const auto& pi : all_permutations(params.size())) probs.push_back(std::exp(log_prob(params, pi)));
  // Sums to 1 up to rounding; absorb the residue so downstream tables validate.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
  return ExactDistribution(params.size(), std::move(probs));
}

ExactDistribution enumerate_mixture(const MixturePL& mix) {
  require_enumerable(mix.num_items());
  std::vector<double> probs;
  for (const auto& pi : all_permutations(mix.num_items())) probs.push_back(std::exp(mixture_log_prob(mix, pi)));
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
  return ExactDistribution(mix.num_items(), std::move(probs));
}

ExactDistribution empirical_distribution(std::size_t n, std::span<const Permutation> samples) {
  require_enumerable(n);
  if (samples.empty()) throw InvalidArgument("empirical distribution needs samples");
  std::vector<double> counts(factorial(n), 0.0);
  for (const auto& s : samples) {
    if (s.size() != n) throw InvalidArgument("sample size mismatch");
    counts[permutation_index(s)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(samples.size());
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double& c : counts) c /= total;
  return ExactDistribution(n, std::move(counts));
}

double total_variation(const ExactDistribution& p, const ExactDistribution& q) {
  if (p.num_items() != q.num_items()) throw InvalidArgument("total_variation: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

MixturePL construct_dense_mixture(const ExactDistribution& target, double epsilon) {
  const std::size_t n = target.num_items();
  if (n > 6) throw CapacityError("construct_dense_mixture supports at most 6 items");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");

  const auto perms = all_permutations(n);
  std::vector<double> weights;
  std::vector<PLParams> comps;
  for (std::size_t idx = 0; idx < perms.size(); ++idx) {
    if (target[idx] <= 0.0) continue;
    const auto ranks = perms[idx].ranks();
    bool reached = false;
    for (double scale = 5.0; scale <= 1024.0; scale *= 2.0) {
      std::vector<double> logits(n);
      for (std::size_t i = 0; i < n; ++i) logits[i] = -scale * ranks[i];
      // The construction needs logits beyond the default clip: spread is scale * (n - 1).
      PLParams comp = center_and_clip(logits, scale * static_cast<double>(n - 1) / 2.0 + 1e-9);
      if (std::exp(log_prob(comp, perms[idx])) >= 1.0 - epsilon / 2.0) {
        comps.push_back(std::move(comp));
        weights.push_back(target[idx]);
        reached = true;
        break;
      }
    }
    if (!reached) throw ConstructionError("component for " + perms[idx].to_string() + " cannot reach epsilon");
  }
  const double floor = std::min(kMinComponentWeight, 1.0 / static_cast<double>(weights.size()));
  MixturePL mix(floor_and_normalize(weights, floor), std::move(comps), floor);
  const double tv = total_variation(enumerate_mixture(mix), target);
  if (!(tv < epsilon)) {
    throw ConstructionError("dense mixture reached TV " + std::to_string(tv) + ", not below " +
                            std::to_string(epsilon));
  }
  return mix;
}

SinglePLFit best_single_pl_fit(const ExactDistribution& target) {
  const std::size_t n = target.num_items();
  if (n > 5) throw CapacityError("best_single_pl_fit supports at most 5 items");
  constexpr int kStarts = 20;
  constexpr double kInitialStep = 4.0;
  constexpr double kMinStep = 1e-3;
  constexpr double kBound = 20.0;

  // Free coordinates are the first n-1 logits; the last one is -sum(free).
  auto realize = [n](const std::vector<double>& free) {
    std::vector<double> theta(free);
    theta.push_back(-std::accumulate(free.begin(), free.end(), 0.0));
    (void)n;
    return PLParams(std::move(theta));
  };
  auto objective = [&](const std::vector<double>& free) {
    return total_variation(enumerate_pl(realize(free)), target);
  };

  RandomSource rng(0x5eed);
  SinglePLFit best{PLParams::uniform(n), objective(std::vector<double>(n - 1, 0.0))};
  for (int start = 0; start < kStarts; ++start) {
    std::vector<double> x(n - 1, 0.0);
    if (start > 0) {
      for (double& v : x) v = -5.0 + 10.0 * rng.uniform_open();
    }
    double fx = objective(x);
    for (double step = kInitialStep; step >= kMinStep;) {
      bool improved = false;
      for (std::size_t c = 0; c + 1 < n; ++c) {
        for (double dir : {+1.0, -1.0}) {
          std::vector<double> y = x;
          y[c] = std::clamp(y[c] + dir * step, -kBound, kBound);
          const double fy = objective(y);
          if (fy < fx) {
            x = std::move(y);
            fx = fy;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (fx < best.tv) best = SinglePLFit{realize(x), fx};
  }
  return best;
}

std::pair<Permutation, double> exhaustive_argmax(ScoreFunction& scorer, std::size_t n,
                                                 std::span<const LabeledExample> dataset) {
  if (n == 0) throw InvalidArgument("exhaustive_argmax: n must be >= 1");
  if (n > 6) throw CapacityError("exhaustive_argmax supports at most 6 items");
  const auto perms = all_permutations(n);
  std::size_t best = 0;
  double best_score = scorer.evaluate(perms[0], dataset);
  for (std::size_t i = 1; i < perms.size(); ++i) {
    const double s = scorer.evaluate(perms[i], dataset);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return {perms[best], best_score};
}

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman: need two equal-length samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace plr
