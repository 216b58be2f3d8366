#include "plr/pl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "plr/errors.hpp"

namespace plr {

namespace {

void require_same_size(const PLParams& params, const Permutation& pi) {
  if (params.size() != pi.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(params.size()) + " logits vs permutation of " +
                          std::to_string(pi.size()));
  }
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

PLParams::PLParams(std::vector<double> logits) : logits_(std::move(logits)) {
  for (double v : logits_) {
    if (!std::isfinite(v)) throw InvalidArgument("PL logits must be finite");
  }
}

MixturePL::MixturePL(std::vector<double> weights, std::vector<PLParams> components, double min_weight)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  if (weights_.size() != components_.size()) throw InvalidArgument("mixture weight/component count mismatch");
  const std::size_t n = components_.front().size();
  for (const auto& c : components_) {
    if (c.size() != n) throw InvalidArgument("mixture components disagree on item count");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < min_weight * (1.0 - 1e-9)) {
      throw InvalidArgument("mixture weight below floor " + std::to_string(min_weight));
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
}

MixturePL MixturePL::single(PLParams params) { return MixturePL({1.0}, {std::move(params)}); }

double logsumexp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double log_prob(const PLParams& params, const Permutation& pi) {
  require_same_size(params, pi);
  // Walk from the last rank backwards so the remaining-set normalizer is a
  // running log-sum-exp.
  double total = 0.0;
  double tail = -std::numeric_limits<double>::infinity();
  for (std::size_t r = pi.size(); r-- > 0;) {
    const double v = params[pi[r]];
    tail = log_add_exp(tail, v);
    total += v - tail;
  }
  return std::min(total, 0.0);
}

Permutation sample(const PLParams& params, RandomSource& rng) {
  if (params.size() == 0) throw InvalidArgument("cannot sample from an empty item set");
  std::vector<double> keys(params.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double u = rng.uniform_open();
    keys[i] = params[i] - std::log(-std::log(u));
  }
  return argsort_descending(keys);
}

std::vector<Permutation> sample_batch(const PLParams& params, std::size_t count, RandomSource& rng) {
  if (count == 0) throw InvalidArgument("sample_batch: count must be >= 1");
  std::vector<Permutation> out;
  out.reserve(count);
  for (std::size_t b = 0; b < count; ++b) out.push_back(sample(params, rng));
  return out;
}

PLParams center(const PLParams& params) {
  std::vector<double> v = params.vector();
  if (v.empty()) return params;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
  return PLParams(std::move(v));
}

PLParams center_and_clip(std::span<const double> logits, double clip) {
  PLParams centered = center(PLParams(std::vector<double>(logits.begin(), logits.end())));
  std::vector<double> v = centered.vector();
  for (double& x : v) x = std::clamp(x, -clip, clip);
  return PLParams(std::move(v));
}

Permutation mode(const PLParams& params) { return argsort_descending(params.logits()); }

double mixture_log_prob(const MixturePL& mix, const Permutation& pi) {
  if (mix.num_items() != pi.size()) throw InvalidArgument("mixture/permutation dimension mismatch");
  std::vector<double> terms(mix.num_components());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    terms[k] = std::log(mix.weights()[k]) + log_prob(mix.component(k), pi);
  }
  return std::min(logsumexp(terms), 0.0);
}

Permutation mixture_sample(const MixturePL& mix, RandomSource& rng) {
  const std::size_t k = rng.categorical(mix.weights());
  return sample(mix.component(k), rng);
}

double iia_choice_ratio(const PLParams& params, int a, int b, std::span<const int> prefix) {
  const int n = static_cast<int>(params.size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw InvalidArgument("iia_choice_ratio: item out of range");
  if (a == b) throw InvalidArgument("iia_choice_ratio: a and b must differ");
  std::vector<char> placed(params.size(), 0);
  for (int p : prefix) {
    if (p < 0 || p >= n || placed[p]) throw InvalidArgument("iia_choice_ratio: invalid prefix");
    placed[p] = 1;
  }
  if (placed[a] || placed[b]) throw InvalidArgument("iia_choice_ratio: item already placed");

  std::vector<double> remaining;
  for (int i = 0; i < n; ++i) {
    if (!placed[i]) remaining.push_back(params[i]);
  }
  const double norm = logsumexp(remaining);
  const double log_pa = params[a] - norm;
  const double log_pb = params[b] - norm;
  return std::exp(log_pa - log_pb);
}

std::vector<double> floor_and_normalize(std::span<const double> weights, double min_weight) {
  const std::size_t k = weights.size();
  if (k == 0) throw InvalidArgument("floor_and_normalize: no weights");
  if (static_cast<double>(k) * min_weight > 1.0 + 1e-12) throw InvalidArgument("floor_and_normalize: floor too large");
  std::vector<double> w(weights.begin(), weights.end());
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) throw InvalidArgument("floor_and_normalize: weights must be finite and >= 0");
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
    return w;
  }
  for (double& x : w) x /= total;

  // Pin components that fall under the floor, rescale the free ones into the
  // leftover mass, and repeat until no free component drops below the floor.
  std::vector<char> pinned(k, 0);
  for (;;) {
    double pinned_mass = 0.0;
    double free_mass = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) pinned_mass += min_weight;
      else free_mass += w[i];
    }
    bool changed = false;
    const double scale = free_mass > 0.0 ? (1.0 - pinned_mass) / free_mass : 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) continue;
      if (w[i] * scale < min_weight) {
        pinned[i] = 1;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t i = 0; i < k; ++i) w[i] = pinned[i] ? min_weight : w[i] * scale;
      break;
    }
  }
  total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace plr
