#include "plr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "plr/oracle.hpp"
#include "plr/random.hpp"

namespace plr {

namespace {

PropertyCheck below(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, "<", measured < threshold};
}

PropertyCheck at_least(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, ">=", measured >= threshold};
}

PLParams random_logits(std::size_t n, double lo, double hi, RandomSource& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform_open();
  return PLParams(std::move(v));
}

double sampler_fidelity() {
  RandomSource rng(0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const PLParams theta = random_logits(4, -5.0, 5.0, rng);
    const auto samples = sample_batch(theta, 100000, rng);
    worst = std::max(worst, total_variation(empirical_distribution(4, samples), enumerate_pl(theta)));
  }
  return worst;
}

double normalization_error() {
  RandomSource rng(1);
  double worst = 0.0;
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto perms = all_permutations(n);
    for (int trial = 0; trial < 20; ++trial) {
      const PLParams theta = random_logits(n, -5.0, 5.0, rng);
      double total = 0.0;
      for (const auto& pi : perms) total += std::exp(log_prob(theta, pi));
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return worst;
}

double gradient_error(const GradientFn& gradient) {
  RandomSource rng(2);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PLParams theta = random_logits(5, -3.0, 3.0, rng);
    std::vector<EliteMember> members;
    for (int m = 0; m < 6; ++m) members.push_back({sample(PLParams::uniform(5), rng), 0.0, 0.5 + 1.5 * rng.uniform_open()});
    const EliteSet elites(std::move(members));
    const auto analytic = gradient(theta, elites);
    for (std::size_t i = 0; i < 5; ++i) {
      auto plus = theta.vector(), minus = theta.vector();
      plus[i] += h;
      minus[i] -= h;
      const double numeric = (weighted_log_likelihood(PLParams(plus), elites) -
                              weighted_log_likelihood(PLParams(minus), elites)) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - numeric));
    }
  }
  return worst;
}

double mle_recovery_error() {
  RandomSource rng(0);
  const PLParams truth({2.0, 0.0, -2.0});
  const EliteSet elites = EliteSet::from_permutations(sample_batch(truth, 5000, rng));
  const PLParams fit = mle_fit(elites, PLParams::uniform(3), GradientFitConfig{.steps = 2000, .learning_rate = 0.05});
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(fit[i] - truth[i]));
  return worst;
}

struct EmOutcome {
  double weight_error = 1.0;
  double worst_round_drop = 0.0;
};

EmOutcome em_recovery() {
  RandomSource rng(0);
  auto perms = sample_batch(PLParams({6.0, 0.0, -6.0}), 500, rng);
  auto other = sample_batch(PLParams({-6.0, 0.0, 6.0}), 500, rng);
  perms.insert(perms.end(), other.begin(), other.end());
  const EliteSet elites = EliteSet::from_permutations(std::move(perms));

  EmOutcome out;
  double best_ll = -INFINITY;
  for (int restart = 0; restart < 3; ++restart) {
    const MixturePL init = perturbed_mixture(PLParams::uniform(3), 2, 0.5, rng);
    const EMResult res = em_fit_traced(elites, init, GradientFitConfig{}, 20);
    for (std::size_t r = 1; r < res.log_likelihood.size(); ++r) {
      out.worst_round_drop = std::max(out.worst_round_drop, res.log_likelihood[r - 1] - res.log_likelihood[r]);
    }
    if (res.log_likelihood.back() <= best_ll) continue;
    best_ll = res.log_likelihood.back();
    const auto& mix = res.mixture;
    const Permutation fwd({0, 1, 2}), bwd({2, 1, 0});
    const Permutation m0 = mode(mix.component(0)), m1 = mode(mix.component(1));
    const bool modes_ok = (m0 == fwd && m1 == bwd) || (m0 == bwd && m1 == fwd);
    out.weight_error = modes_ok ? std::max(std::abs(mix.weights()[0] - 0.5), std::abs(mix.weights()[1] - 0.5)) : 1.0;
  }
  return out;
}

ExactDistribution cyclic_target() {
  std::vector<double> p(6, 0.0);
  for (const auto& pi : {Permutation({0, 1, 2}), Permutation({1, 2, 0}), Permutation({2, 0, 1})}) {
    p[permutation_index(pi)] = 1.0 / 3.0;
  }
  return ExactDistribution(3, std::move(p));
}

}  // namespace

std::vector<PropertyCheck> run_property_checks(const VerifyOptions& options) {
  const GradientFn gradient = options.gradient ? options.gradient : GradientFn(pl_grad);
  std::vector<PropertyCheck> checks;
  checks.push_back(below("sampler fidelity: max TV, n=4, 10 logits, 1e5 draws", sampler_fidelity(), 0.015));
  checks.push_back(below("density normalization: max |sum - 1|, n=2..6", normalization_error(), 1e-8));
  checks.push_back(below("gradient vs central differences: max abs, n=5", gradient_error(gradient), 1e-6));
  checks.push_back(below("MLE recovery of (2,0,-2): max coordinate error", mle_recovery_error(), 0.15));
  const EmOutcome em = em_recovery();
  checks.push_back(below("EM bimodal recovery: max |alpha - 0.5| (1 if modes wrong)", em.weight_error, 0.05));
  checks.push_back(below("EM log-likelihood: worst per-round drop", em.worst_round_drop, 1e-4));
  const ExactDistribution cyclic = cyclic_target();
  checks.push_back(
      below("dense mixture TV on cyclic n=3 target", total_variation(enumerate_mixture(construct_dense_mixture(cyclic, 0.01)), cyclic), 0.01));
  checks.push_back(at_least("best single-PL TV on cyclic n=3 target", best_single_pl_fit(cyclic).tv, 0.1));
  return checks;
}

void print_checks(const std::vector<PropertyCheck>& checks, std::ostream& out) {
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  for (const auto& c : checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << c.name << "  "
        << std::setprecision(6) << std::scientific << c.measured << ' ' << c.relation << ' ' << c.threshold
        << std::defaultfloat << '\n';
  }
}

}  // namespace plr
