#include <doctest.h>

#include <cmath>

#include "plr/errors.hpp"
#include "plr/oracle.hpp"

using namespace plr;

namespace {

ExactDistribution point_mass(std::size_t n, const Permutation& pi) {
  std::vector<double> p(all_permutations(n).size(), 0.0);
  p[permutation_index(pi)] = 1.0;
  return ExactDistribution(n, std::move(p));
}

ExactDistribution uniform_over(std::size_t n, const std::vector<Permutation>& support) {
  std::vector<double> p(all_permutations(n).size(), 0.0);
  for (const auto& pi : support) p[permutation_index(pi)] = 1.0 / static_cast<double>(support.size());
  return ExactDistribution(n, std::move(p));
}

ExactDistribution random_simplex(std::size_t n, RandomSource& rng) {
  std::vector<double> p(all_permutations(n).size());
  double total = 0.0;
  for (double& x : p) total += (x = -std::log(rng.uniform_open()));
  for (double& x : p) x /= total;
  return ExactDistribution(n, std::move(p));
}

ExactDistribution cyclic_target() {
  return uniform_over(3, {Permutation({0, 1, 2}), Permutation({1, 2, 0}), Permutation({2, 0, 1})});
}

}  // namespace

TEST_CASE("enumeration order and indexing") {
  const auto perms = all_permutations(3);
  REQUIRE(perms.size() == 6);
  CHECK(perms.front() == Permutation({0, 1, 2}));
  CHECK(perms[1] == Permutation({0, 2, 1}));
  CHECK(perms.back() == Permutation({2, 1, 0}));
  for (std::size_t i = 0; i < perms.size(); ++i) CHECK(permutation_index(perms[i]) == i);
  const auto p5 = all_permutations(5);
  for (std::size_t i = 0; i < p5.size(); i += 7) CHECK(permutation_index(p5[i]) == i);
}

TEST_CASE("exact distribution invariants") {
  CHECK_THROWS_AS(ExactDistribution(2, {0.5, 0.4}), InvalidArgument);
  CHECK_THROWS_AS(ExactDistribution(2, {0.5}), InvalidArgument);
  CHECK_THROWS_AS(ExactDistribution(2, {1.5, -0.5}), InvalidArgument);
  CHECK_THROWS_AS(enumerate_pl(PLParams::uniform(9)), CapacityError);
}

TEST_CASE("enumerate_pl worked examples") {
  const ExactDistribution u3 = enumerate_pl(PLParams::uniform(3));
  for (double p : u3.probabilities()) CHECK(p == doctest::Approx(1.0 / 6.0));
  const ExactDistribution two = enumerate_pl(PLParams({std::log(3.0), 0}));
  CHECK(two.probability(Permutation({0, 1})) == doctest::Approx(0.75));
  CHECK(two.probability(Permutation({1, 0})) == doctest::Approx(0.25));
}

TEST_CASE("total_variation worked examples") {
  const ExactDistribution u = enumerate_pl(PLParams::uniform(2));
  CHECK(total_variation(u, u) == 0.0);
  CHECK(total_variation(point_mass(3, Permutation({0, 1, 2})), point_mass(3, Permutation({1, 0, 2}))) == 1.0);
  CHECK(total_variation(u, enumerate_pl(PLParams({std::log(3.0), 0}))) == doctest::Approx(0.25));
  CHECK_THROWS_AS(total_variation(u, enumerate_pl(PLParams::uniform(3))), InvalidArgument);
}

TEST_CASE("construct_dense_mixture worked examples") {
  const auto pm = construct_dense_mixture(point_mass(4, Permutation({3, 1, 0, 2})), 0.01);
  CHECK(pm.num_components() == 1);
  CHECK(total_variation(enumerate_mixture(pm), point_mass(4, Permutation({3, 1, 0, 2}))) <= 0.01);

  const ExactDistribution uniform = enumerate_pl(PLParams::uniform(3));
  const auto um = construct_dense_mixture(uniform, 0.05);
  CHECK(um.num_components() == 6);
  CHECK(total_variation(enumerate_mixture(um), uniform) < 0.05);

  const auto two = construct_dense_mixture(uniform_over(4, {Permutation({0, 1, 2, 3}), Permutation({3, 2, 1, 0})}), 0.01);
  CHECK(two.num_components() == 2);
  CHECK_THROWS_AS(construct_dense_mixture(uniform, 0.0), InvalidArgument);
}

TEST_CASE("construct_dense_mixture meets its contract on random targets") {
  RandomSource rng(31);
  for (std::size_t n : {3u, 4u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ExactDistribution target = random_simplex(n, rng);
      const MixturePL mix = construct_dense_mixture(target, 0.05);
      CHECK(total_variation(enumerate_mixture(mix), target) < 0.05);
    }
  }
}

TEST_CASE("best_single_pl_fit") {
  CHECK(best_single_pl_fit(enumerate_pl(PLParams({1, 0, -1}))).tv < 1e-2);
  const SinglePLFit u = best_single_pl_fit(enumerate_pl(PLParams::uniform(3)));
  CHECK(u.tv < 1e-3);
  for (double v : u.params.logits()) CHECK(std::abs(v) < 0.05);
  CHECK_THROWS_AS(best_single_pl_fit(enumerate_pl(PLParams::uniform(6))), CapacityError);
}

TEST_CASE("best_single_pl_fit realizes PL targets at n=4") {
  RandomSource rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> theta(4);
    for (double& x : theta) x = -3.0 + 6.0 * rng.uniform_open();
    CHECK(best_single_pl_fit(enumerate_pl(PLParams(theta))).tv < 1e-2);
  }
}

TEST_CASE("the cyclic target separates mixtures from a single PL") {
  const ExactDistribution target = cyclic_target();
  CHECK(total_variation(enumerate_mixture(construct_dense_mixture(target, 0.01)), target) < 0.01);
  CHECK(best_single_pl_fit(target).tv >= 0.1);
}

TEST_CASE("exhaustive_argmax") {
  MallowsScorer mallows(Permutation({2, 0, 3, 1}));
  const auto [best, score] = exhaustive_argmax(mallows, 4, {});
  CHECK(best == Permutation({2, 0, 3, 1}));
  CHECK(score == 1.0);

  ConstantScorer constant(0.3);
  CHECK(exhaustive_argmax(constant, 4, {}).first == Permutation({0, 1, 2, 3}));

  BimodalScorer bimodal(Permutation({1, 3, 0, 2}), Permutation({2, 0, 3, 1}));
  const auto [mode_pi, mode_score] = exhaustive_argmax(bimodal, 4, {});
  CHECK((mode_pi == Permutation({1, 3, 0, 2}) || mode_pi == Permutation({2, 0, 3, 1})));
  CHECK(mode_score == 1.0);
  CHECK_THROWS_AS(exhaustive_argmax(constant, 7, {}), CapacityError);
}

TEST_CASE("spearman_correlation") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4}, c{4, 3, 2, 1}, tied{1, 2, 2, 3};
  CHECK(spearman_correlation(a, a) == doctest::Approx(1.0));
  CHECK(spearman_correlation(a, c) == doctest::Approx(-1.0));
  CHECK(spearman_correlation(a, b) == doctest::Approx(0.8));
  CHECK(spearman_correlation(tied, a) == doctest::Approx(0.9486833));
  const std::vector<double> bad{1, 2};
  CHECK_THROWS_AS(spearman_correlation(a, bad), InvalidArgument);
}
