#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "plr/errors.hpp"
#include "plr/oracle.hpp"
#include "plr/scoring.hpp"

using namespace plr;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Permutation relabel(const Permutation& pi, const Permutation& sigma) {
  std::vector<int> out(pi.size());
  for (std::size_t r = 0; r < pi.size(); ++r) out[r] = sigma[static_cast<std::size_t>(pi[r])];
  return Permutation(std::move(out));
}

}  // namespace

TEST_CASE("assemble_prompt order semantics") {
  const std::vector<Demonstration> ex{{"A", "1"}, {"B", "2"}};
  PromptTemplate tpl;
  tpl.prefix = "P";
  const std::string ident = assemble_prompt(tpl, ex, Permutation({0, 1}), "Q");
  CHECK(ident == "P\n\nInput: A\nAnswer: 1\n\nInput: B\nAnswer: 2\n\nInput: Q\nAnswer:");
  const std::string swapped = assemble_prompt(tpl, ex, Permutation({1, 0}), "Q");
  CHECK(swapped.find("Input: B") < swapped.find("Input: A"));
  CHECK_THROWS_AS(assemble_prompt(tpl, ex, Permutation({0, 1, 2}), "Q"), InvalidArgument);
}

TEST_CASE("assemble_prompt golden file") {
  const std::vector<Demonstration> ex{{"the plot drags", "negative"},
                                      {"a warm, funny story", "positive"},
                                      {"I walked out early", "negative"},
                                      {"stunning visuals", "positive"}};
  PromptTemplate tpl;
  tpl.prefix = "Classify the sentiment of each review.";
  tpl.example_format = "Review: {input}\nSentiment: {answer}";
  tpl.query_format = "Review: {input}\nSentiment:";
  const std::string got = assemble_prompt(tpl, ex, Permutation({2, 0, 3, 1}), "a fine film");
  CHECK(got == read_file(std::string(PLR_TEST_DATA_DIR) + "/golden_prompt.txt"));
}

TEST_CASE("assemble_prompt leaves placeholder text inside inputs alone") {
  const std::vector<Demonstration> ex{{"say {answer}", "x"}};
  const std::string out = assemble_prompt(PromptTemplate{}, ex, Permutation({0}), "{input}");
  CHECK(out == "\n\nInput: say {answer}\nAnswer: x\n\nInput: {input}\nAnswer:");
}

TEST_CASE("assemble_prompt is injective over permutations") {
  std::vector<Demonstration> ex;
  for (int i = 0; i < 5; ++i) ex.emplace_back("x" + std::to_string(i), "y" + std::to_string(i));
  std::set<std::string> seen;
  for (const auto& pi : all_permutations(5)) seen.insert(assemble_prompt(PromptTemplate{}, ex, pi, "q"));
  CHECK(seen.size() == 120);
}

TEST_CASE("template validation") {
  PromptTemplate tpl;
  CHECK_NOTHROW(tpl.validate());
  tpl.example_format = "Input: {input}";
  CHECK_THROWS_AS(tpl.validate(), InvalidArgument);
  tpl = PromptTemplate{};
  tpl.query_format = "{input} {input}";
  CHECK_THROWS_AS(tpl.validate(), InvalidArgument);
  CHECK_THROWS_AS(Demonstration("", "a"), InvalidArgument);
}

TEST_CASE("mallows_score worked examples") {
  const Permutation target({0, 1, 2});
  CHECK(mallows_score(target, target) == 1.0);
  CHECK(mallows_score(target.reversed(), target) == 0.0);
  CHECK(mallows_score(Permutation({0, 2, 1}), target) == doctest::Approx(2.0 / 3.0));
  CHECK(mallows_score(Permutation({0}), Permutation({0})) == 1.0);
  CHECK_THROWS_AS(mallows_score(Permutation({0, 1}), target), InvalidArgument);
}

TEST_CASE("mallows_score properties") {
  RandomSource rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Permutation a = random_permutation(7, rng), b = random_permutation(7, rng), s = random_permutation(7, rng);
    const double v = mallows_score(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == mallows_score(b, a));
    CHECK(v == doctest::Approx(mallows_score(relabel(a, s), relabel(b, s))).epsilon(1e-15));
  }
}

TEST_CASE("bimodal_score worked examples") {
  const Permutation a({0, 1, 2}), b({2, 1, 0});
  CHECK(bimodal_score(a, a, b) == 1.0);
  CHECK(bimodal_score(b, a, b) == 1.0);
  CHECK(bimodal_score(Permutation({1, 0, 2}), a, b) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("exact_match_metric") {
  CHECK(exact_match_metric("Positive ", "positive") == 1);
  CHECK(exact_match_metric("positive", "negative") == 0);
  CHECK(exact_match_metric("  POSITIVE.", "positive") == 1);
  CHECK(exact_match_metric("", "positive") == 0);
}

TEST_CASE("numeric_answer_metric") {
  CHECK(numeric_answer_metric("... the answer is 42.", "42") == 1);
  CHECK(numeric_answer_metric("we get 3, then 7, so 21", "21") == 1);
  CHECK(numeric_answer_metric("no digits here", "5") == 0);
  CHECK(numeric_answer_metric("total: 1,234", "1234") == 1);
  CHECK(numeric_answer_metric("-3.50", "-3.5") == 1);
  CHECK(numeric_answer_metric("so 22", "21") == 0);
  CHECK_THROWS_AS(numeric_answer_metric("1", "n/a"), InvalidArgument);
}

TEST_CASE("dataset reading") {
  std::istringstream ok("{\"input\": \"a\", \"label\": \"b\"}\n\n{\"input\": \"c\", \"label\": \"d\"}\n");
  const Dataset d = read_dataset_jsonl(ok);
  REQUIRE(d.size() == 2);
  CHECK(d[1] == LabeledExample{"c", "d"});

  std::istringstream missing("{\"input\": \"a\"}\n");
  CHECK_THROWS_AS(read_dataset_jsonl(missing), InvalidArgument);
  std::istringstream garbage("not json\n");
  CHECK_THROWS_AS(read_dataset_jsonl(garbage), InvalidArgument);

  CHECK(load_dataset(std::string(PLR_TEST_DATA_DIR) + "/tiny.jsonl").size() == 2);
  CHECK_THROWS(load_dataset("/nonexistent/data.jsonl"));
}

TEST_CASE("make_splits is disjoint and honours the budget") {
  Dataset pool;
  for (int i = 0; i < 50; ++i) pool.push_back({"q" + std::to_string(i), "a"});
  RandomSource rng(22);
  const DataSplits s = make_splits(pool, 20, 0.8, rng);
  CHECK(s.inner_pool.size() == 16);
  CHECK(s.validation.size() == 4);
  std::set<std::string> inner;
  for (const auto& e : s.inner_pool) inner.insert(e.input);
  for (const auto& e : s.validation) CHECK(inner.count(e.input) == 0);

  RandomSource rng2(22);
  const DataSplits all = make_splits(pool, 1000, 0.8, rng2);
  CHECK(all.inner_pool.size() + all.validation.size() == 50);
}

TEST_CASE("random_permutation covers S_3 uniformly") {
  RandomSource rng(23);
  std::vector<Permutation> draws;
  for (int i = 0; i < 60000; ++i) draws.push_back(random_permutation(3, rng));
  const ExactDistribution dist = empirical_distribution(3, draws);
  for (double p : dist.probabilities()) CHECK(std::abs(p - 1.0 / 6.0) <= 0.01);
}
