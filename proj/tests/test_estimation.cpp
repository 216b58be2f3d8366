#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "plr/errors.hpp"
#include "plr/estimation.hpp"
#include "plr/oracle.hpp"

using namespace plr;

namespace {

std::vector<double> random_vector(std::size_t n, double lo, double hi, RandomSource& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform_open();
  return v;
}

EliteSet random_elites(std::size_t n, std::size_t m, RandomSource& rng) {
  std::vector<EliteMember> members;
  for (std::size_t i = 0; i < m; ++i) {
    members.push_back({sample(PLParams::uniform(n), rng), rng.uniform_open(), 0.5 + 1.5 * rng.uniform_open()});
  }
  return EliteSet(std::move(members));
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= tol);
}

}  // namespace

TEST_CASE("elite set invariants") {
  CHECK_THROWS_AS(EliteSet(std::vector<EliteMember>{}), InvalidArgument);
  CHECK_THROWS_AS(EliteSet({{Permutation({0, 1}), 0.5, 1.0}, {Permutation({0, 1, 2}), 0.5, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(EliteSet({{Permutation({0, 1}), 0.5, -1.0}}), InvalidArgument);
  const auto e = EliteSet::from_permutations({Permutation({0, 1}), Permutation({1, 0})});
  CHECK(e.total_weight() == 2.0);
  CHECK(e[0].weight == 1.0);
}

TEST_CASE("ema_rank_update worked examples") {
  const EliteSet one = EliteSet::from_permutations({Permutation({0, 1, 2})});
  check_close(ema_rank_update(PLParams::uniform(3), one, {1.0, 1.0, 20.0}).vector(), {1, 0, -1}, 1e-12);

  const PLParams theta({0.4, 1.0, -3.0});
  check_close(ema_rank_update(theta, one, {0.0, 1.0, 20.0}).vector(), center(theta).vector(), 1e-12);

  const EliteSet sym = EliteSet::from_permutations({Permutation({0, 1, 2}), Permutation({2, 1, 0})});
  for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
    check_close(ema_rank_update(PLParams::uniform(3), sym, {alpha, 1.0, 20.0}).vector(), {0, 0, 0}, 1e-12);
  }
  CHECK_THROWS_AS(ema_rank_update(PLParams::uniform(2), one, {}), InvalidArgument);
}

TEST_CASE("ema_rank_update respects the clip bound") {
  RandomSource rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const PLParams theta(random_vector(32, -20, 20, rng));
    const EliteSet elites = random_elites(32, 3, rng);
    const PLParams out = ema_rank_update(theta, elites, {0.7, 0.05, 20.0});
    for (double v : out.logits()) CHECK(std::abs(v) <= 20.0);
  }
}

TEST_CASE("ema_blend worked examples") {
  check_close(ema_blend(PLParams({1, -1}), PLParams({3, -3}), 0.5).vector(), {2, -2}, 1e-12);
  check_close(ema_blend(PLParams({1, 5}), PLParams({3, -3}), 0.0).vector(), {-2, 2}, 1e-12);
  check_close(ema_blend(PLParams({1, 5}), PLParams({30, -30}), 1.0).vector(), {20, -20}, 1e-12);
  CHECK_THROWS_AS(ema_blend(PLParams({1, 5}), PLParams({3, -3}), 1.5), InvalidArgument);
}

TEST_CASE("pl_grad worked examples") {
  check_close(pl_grad(PLParams::uniform(2), EliteSet::from_permutations({Permutation({0, 1})})), {0.5, -0.5}, 1e-12);
  check_close(pl_grad(PLParams::uniform(4), EliteSet::from_permutations(all_permutations(4))), {0, 0, 0, 0}, 1e-12);
}

TEST_CASE("pl_grad matches central differences") {
  RandomSource rng(4);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> theta = random_vector(5, -3, 3, rng);
    const EliteSet elites = random_elites(5, 6, rng);
    const auto grad = pl_grad(PLParams(theta), elites);
    for (std::size_t i = 0; i < 5; ++i) {
      auto up = theta, down = theta;
      up[i] += h;
      down[i] -= h;
      const double fd =
          (weighted_log_likelihood(PLParams(up), elites) - weighted_log_likelihood(PLParams(down), elites)) / (2 * h);
      CHECK(std::abs(grad[i] - fd) < 1e-6);
    }
  }
}

TEST_CASE("the objective is concave along segments") {
  RandomSource rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const EliteSet elites = random_elites(5, 8, rng);
    const auto a = random_vector(5, -5, 5, rng);
    const auto b = random_vector(5, -5, 5, rng);
    std::vector<double> mid(5);
    for (std::size_t i = 0; i < 5; ++i) mid[i] = 0.5 * (a[i] + b[i]);
    const double chord =
        0.5 * (mle_objective(PLParams(a), elites, 0.1) + mle_objective(PLParams(b), elites, 0.1));
    CHECK(mle_objective(PLParams(mid), elites, 0.1) >= chord - 1e-8);
  }
}

TEST_CASE("mle_fit: symmetric elites give uniform logits") {
  const EliteSet elites = EliteSet::from_permutations(all_permutations(3));
  const PLParams fit = mle_fit(elites, PLParams::uniform(3), {});
  for (double v : fit.logits()) CHECK(std::abs(v) <= 1e-3);
  CHECK_THROWS_AS(mle_fit(elites, PLParams::uniform(4), {}), InvalidArgument);
}

TEST_CASE("mle_fit recovers the generating logits") {
  RandomSource rng(0);
  const EliteSet elites = EliteSet::from_permutations(sample_batch(PLParams({2, 0, -2}), 5000, rng));
  const PLParams fit = mle_fit(elites, PLParams::uniform(3), {2000, 0.05, 0.0, 20.0});
  check_close(fit.vector(), {2, 0, -2}, 0.15);
  double norm = 0.0;
  for (double g : pl_grad(fit, elites)) norm += g * g;
  CHECK(std::sqrt(norm) / elites.total_weight() < 1e-3);
}

TEST_CASE("mle_fit on a repeated elite moves toward it") {
  const EliteSet elites = EliteSet::from_permutations(std::vector<Permutation>(5, Permutation({1, 0, 2})));
  const PLParams fit = mle_fit(elites, PLParams::uniform(3), {500, 0.1, 0.0, 20.0});
  CHECK(mode(fit) == Permutation({1, 0, 2}));
  for (double v : fit.logits()) CHECK(std::abs(v) <= 20.0);
}

TEST_CASE("mle_fit never lowers the objective") {
  RandomSource rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const EliteSet elites = random_elites(5, 4, rng);
    const PLParams init(random_vector(5, -4, 4, rng));
    for (double lr : {0.01, 0.1, 2.0}) {
      const GradientFitConfig cfg{60, lr, 0.05, 20.0};
      const PLParams fit = mle_fit(elites, init, cfg);
      CHECK(mle_objective(fit, elites, cfg.l2_penalty) >= mle_objective(init, elites, cfg.l2_penalty) - 1e-6);
    }
  }
}

TEST_CASE("responsibilities are normalized") {
  RandomSource rng(7);
  const MixturePL mix = perturbed_mixture(PLParams::uniform(5), 4, 2.0, rng);
  const EliteSet elites = random_elites(5, 10, rng);
  for (const auto& row : responsibilities(mix, elites)) {
    double total = 0.0;
    for (double r : row) total += r;
    CHECK(std::abs(total - 1.0) <= 1e-10);
  }
}

TEST_CASE("em_fit with one component equals mle_fit") {
  RandomSource rng(8);
  const EliteSet elites = random_elites(4, 7, rng);
  const PLParams init({0.2, -0.1, 0.3, -0.4});
  const GradientFitConfig inner{};
  const MixturePL mix = em_fit(elites, MixturePL::single(init), inner, 1);
  check_close(mix.component(0).vector(), mle_fit(elites, init, inner).vector(), 1e-6);
  CHECK(mix.weights()[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(em_fit(elites, MixturePL::single(init), inner, 0), InvalidArgument);
}

TEST_CASE("em_fit recovers a bimodal mixture and is monotone") {
  RandomSource data(0);
  std::vector<Permutation> perms = sample_batch(PLParams({6, 0, -6}), 500, data);
  const auto second = sample_batch(PLParams({-6, 0, 6}), 500, data);
  perms.insert(perms.end(), second.begin(), second.end());
  const EliteSet elites = EliteSet::from_permutations(std::move(perms));

  std::optional<EMResult> best;
  for (std::uint64_t restart = 0; restart < 3; ++restart) {
    RandomSource rng = RandomSource(1).split(restart);
    EMResult r = em_fit_traced(elites, perturbed_mixture(PLParams::uniform(3), 2, 0.5, rng), {}, 20);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      CHECK(r.log_likelihood[i] >= r.log_likelihood[i - 1] - 1e-4);
    }
    if (!best || r.log_likelihood.back() > best->log_likelihood.back()) best = std::move(r);
  }
  const MixturePL& mix = best->mixture;
  const Permutation m0 = mode(mix.component(0)), m1 = mode(mix.component(1));
  const Permutation fwd({0, 1, 2}), rev({2, 1, 0});
  CHECK(((m0 == fwd && m1 == rev) || (m0 == rev && m1 == fwd)));
  CHECK(std::abs(mix.weights()[0] - 0.5) <= 0.05);
  CHECK(std::abs(mix.weights()[1] - 0.5) <= 0.05);
}

TEST_CASE("em_fit keeps collapsed components at the floor") {
  const EliteSet elites = EliteSet::from_permutations(std::vector<Permutation>(10, Permutation({0, 1, 2})));
  const MixturePL init({0.5, 0.5}, {PLParams({5, 0, -5}), PLParams({-20, 0, 20})});
  const MixturePL mix = em_fit(elites, init, {}, 5);
  CHECK(mix.num_components() == 2);
  for (double w : mix.weights()) CHECK(w >= kMinComponentWeight * (1 - 1e-12));
}

TEST_CASE("estimation outputs are bit-identical across repeated runs") {
  auto run_once = [] {
    RandomSource rng(9);
    const EliteSet elites = random_elites(5, 12, rng);
    const MixturePL init = perturbed_mixture(PLParams::uniform(5), 3, 0.5, rng);
    return em_fit(elites, init, {}, 3);
  };
  const MixturePL a = run_once(), b = run_once();
  CHECK(std::ranges::equal(a.weights(), b.weights()));
  for (std::size_t k = 0; k < a.num_components(); ++k) CHECK(a.component(k).vector() == b.component(k).vector());
}
