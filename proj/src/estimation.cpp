#include "plr/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "plr/errors.hpp"

namespace plr {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

void require_items(const PLParams& params, const EliteSet& elites) {
  if (params.size() != elites.num_items()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(params.size()) + " logits vs elites over " +
                          std::to_string(elites.num_items()) + " items");
  }
}

}  // namespace

EliteSet::EliteSet(std::vector<EliteMember> members) : members_(std::move(members)) {
  if (members_.empty()) throw InvalidArgument("elite set must be nonempty");
  const std::size_t n = members_.front().pi.size();
  for (const auto& m : members_) {
    if (m.pi.size() != n) throw InvalidArgument("elite permutations disagree on item count");
    if (!std::isfinite(m.weight) || m.weight < 0.0) throw InvalidArgument("elite weights must be finite and >= 0");
  }
}

EliteSet EliteSet::from_permutations(std::vector<Permutation> perms) {
  std::vector<EliteMember> members;
  members.reserve(perms.size());
  for (auto& p : perms) members.push_back({std::move(p), 0.0, 1.0});
  return EliteSet(std::move(members));
}

double EliteSet::total_weight() const {
  double s = 0.0;
  for (const auto& m : members_) s += m.weight;
  return s;
}

EliteSet EliteSet::with_weights(std::span<const double> weights) const {
  if (weights.size() != members_.size()) throw InvalidArgument("weight count does not match elite count");
  std::vector<EliteMember> out = members_;
  for (std::size_t m = 0; m < out.size(); ++m) out[m].weight = weights[m];
  return EliteSet(std::move(out));
}

EliteSet EliteSet::score_weighted() const {
  std::vector<double> w;
  w.reserve(members_.size());
  for (const auto& m : members_) w.push_back(m.score);
  return with_weights(w);
}

PLParams ema_rank_update(const PLParams& params, const EliteSet& elites, const EMAConfig& cfg) {
  require_items(params, elites);
  if (!(cfg.tau > 0.0)) throw InvalidArgument("rank temperature must be positive");
  const std::size_t n = params.size();
  std::vector<double> mean_rank(n, 0.0);
  for (const auto& m : elites.members()) {
    const auto ranks = m.pi.ranks();
    for (std::size_t i = 0; i < n; ++i) mean_rank[i] += ranks[i];
  }
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = -(mean_rank[i] / static_cast<double>(elites.size())) / cfg.tau;
  }
  return ema_blend(params, PLParams(std::move(target)), cfg.alpha, cfg.clip);
}

PLParams ema_blend(const PLParams& old, const PLParams& fresh, double alpha, double clip) {
  if (old.size() != fresh.size()) throw InvalidArgument("ema_blend: dimension mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("ema_blend: alpha must lie in [0, 1]");
  std::vector<double> v(old.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - alpha) * old[i] + alpha * fresh[i];
  return center_and_clip(v, clip);
}

double weighted_log_likelihood(const PLParams& params, const EliteSet& elites) {
  require_items(params, elites);
  double total = 0.0;
  for (const auto& m : elites.members()) {
    if (m.weight == 0.0) continue;
    total += m.weight * log_prob(params, m.pi);
  }
  return total;
}

std::vector<double> pl_grad(const PLParams& params, const EliteSet& elites) {
  require_items(params, elites);
  const std::size_t n = params.size();
  std::vector<double> grad(n, 0.0);
  std::vector<double> tail_lse(n);
  for (const auto& m : elites.members()) {
    if (m.weight == 0.0) continue;
    // tail_lse[r] = logsumexp of the logits still available at rank r.
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t r = n; r-- > 0;) {
      const double v = params[m.pi[r]];
      const double hi = std::max(acc, v);
      acc = hi + std::log(std::exp(acc - hi) + std::exp(v - hi));
      tail_lse[r] = acc;
    }
    // Item at rank r is in every remaining set R_0..R_r; the final rank
    // contributes 1 - softmax = 0 and is skipped implicitly.
    for (std::size_t r = 0; r < n; ++r) {
      const int item = m.pi[r];
      double expected = 0.0;
      for (std::size_t s = 0; s <= r; ++s) expected += std::exp(params[item] - tail_lse[s]);
      grad[item] += m.weight * (1.0 - expected);
    }
  }
  return grad;
}

double mle_objective(const PLParams& params, const EliteSet& elites, double l2_penalty) {
  double sq = 0.0;
  for (double v : params.logits()) sq += v * v;
  return weighted_log_likelihood(params, elites) - 0.5 * l2_penalty * sq;
}

PLParams mle_fit(const EliteSet& elites, const PLParams& init, const GradientFitConfig& cfg) {
  require_items(init, elites);
  if (!(elites.total_weight() > 0.0)) throw InvalidArgument("mle_fit: elite weights must have positive sum");
  if (cfg.steps < 0 || !(cfg.learning_rate > 0.0) || cfg.l2_penalty < 0.0 || !(cfg.clip > 0.0)) {
    throw InvalidArgument("mle_fit: invalid gradient configuration");
  }
  const std::size_t n = init.size();
  std::vector<double> theta = init.vector();
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  double b1 = 1.0, b2 = 1.0;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<double> g = pl_grad(PLParams(theta), elites);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] -= cfg.l2_penalty * theta[i];
      if (!std::isfinite(g[i])) throw NumericError("mle_fit: non-finite gradient at step " + std::to_string(step));
    }
    b1 *= kAdamBeta1;
    b2 *= kAdamBeta2;
    for (std::size_t i = 0; i < n; ++i) {
      m1[i] = kAdamBeta1 * m1[i] + (1.0 - kAdamBeta1) * g[i];
      m2[i] = kAdamBeta2 * m2[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double mhat = m1[i] / (1.0 - b1);
      const double vhat = m2[i] / (1.0 - b2);
      theta[i] += cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
    theta = center_and_clip(theta, cfg.clip).vector();
  }
  PLParams fitted(std::move(theta));
  // Adam can overshoot near the optimum; fall back to the re-centered start.
  PLParams start = center_and_clip(init.logits(), cfg.clip);
  if (mle_objective(fitted, elites, cfg.l2_penalty) < mle_objective(start, elites, cfg.l2_penalty)) return start;
  return fitted;
}

std::vector<std::vector<double>> responsibilities(const MixturePL& mix, const EliteSet& elites) {
  if (mix.num_items() != elites.num_items()) throw InvalidArgument("responsibilities: dimension mismatch");
  const std::size_t k_count = mix.num_components();
  std::vector<std::vector<double>> r(elites.size(), std::vector<double>(k_count));
  std::vector<double> logits(k_count);
  for (std::size_t m = 0; m < elites.size(); ++m) {
    for (std::size_t k = 0; k < k_count; ++k) {
      logits[k] = std::log(mix.weights()[k]) + log_prob(mix.component(k), elites[m].pi);
    }
    const double norm = logsumexp(logits);
    for (std::size_t k = 0; k < k_count; ++k) r[m][k] = std::exp(logits[k] - norm);
  }
  return r;
}

double mixture_log_likelihood(const MixturePL& mix, const EliteSet& elites) {
  if (mix.num_items() != elites.num_items()) throw InvalidArgument("mixture_log_likelihood: dimension mismatch");
  double total = 0.0;
  for (const auto& m : elites.members()) {
    if (m.weight == 0.0) continue;
    total += m.weight * mixture_log_prob(mix, m.pi);
  }
  return total;
}

EMResult em_fit_traced(const EliteSet& elites, const MixturePL& init, const GradientFitConfig& inner, int rounds,
                       double min_weight) {
  if (init.num_items() != elites.num_items()) throw InvalidArgument("em_fit: dimension mismatch");
  if (rounds < 1) throw InvalidArgument("em_fit: rounds must be >= 1");
  const double total_w = elites.total_weight();
  if (!(total_w > 0.0)) throw InvalidArgument("em_fit: elite weights must have positive sum");

  MixturePL mix = init;
  EMResult result{mix, {mixture_log_likelihood(mix, elites)}};
  const std::size_t k_count = mix.num_components();
  std::vector<double> comp_w(elites.size());

  for (int round = 0; round < rounds; ++round) {
    const auto resp = responsibilities(mix, elites);

    std::vector<double> alpha(k_count, 0.0);
    for (std::size_t m = 0; m < elites.size(); ++m) {
      for (std::size_t k = 0; k < k_count; ++k) alpha[k] += elites[m].weight * resp[m][k];
    }
    for (double& a : alpha) a /= total_w;
    alpha = floor_and_normalize(alpha, min_weight);

    std::vector<PLParams> comps;
    comps.reserve(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      double mass = 0.0;
      for (std::size_t m = 0; m < elites.size(); ++m) {
        comp_w[m] = elites[m].weight * resp[m][k];
        mass += comp_w[m];
      }
      if (mass > 0.0) {
        comps.push_back(mle_fit(elites.with_weights(comp_w), mix.component(k), inner));
      } else {
        // Component explains none of the data: keep it where it is.
        comps.push_back(mix.component(k));
      }
    }
    mix = MixturePL(std::move(alpha), std::move(comps), min_weight);
    result.log_likelihood.push_back(mixture_log_likelihood(mix, elites));
  }
  result.mixture = std::move(mix);
  return result;
}

MixturePL em_fit(const EliteSet& elites, const MixturePL& init, const GradientFitConfig& inner, int rounds,
                 double min_weight) {
  return em_fit_traced(elites, init, inner, rounds, min_weight).mixture;
}

MixturePL perturbed_mixture(const PLParams& base, std::size_t components, double sigma, RandomSource& rng,
                            double clip) {
  if (components == 0) throw InvalidArgument("perturbed_mixture: need at least one component");
  std::vector<PLParams> comps;
  comps.reserve(components);
  for (std::size_t k = 0; k < components; ++k) {
    std::vector<double> v = base.vector();
    for (double& x : v) x += sigma * rng.normal();
    comps.push_back(center_and_clip(v, clip));
  }
  return MixturePL(std::vector<double>(components, 1.0 / static_cast<double>(components)), std::move(comps));
}

}  // namespace plr
