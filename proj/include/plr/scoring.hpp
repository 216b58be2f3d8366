#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plr/permutation.hpp"
#include "plr/random.hpp"

namespace plr {

/// One in-context demonstration (x_i, y_i). Both fields nonempty.
struct Demonstration {
  std::string input;
  std::string answer;

  Demonstration(std::string in, std::string ans);
};

/// An evaluation item: the query and its gold label.
struct LabeledExample {
  std::string input;
  std::string label;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using Dataset = std::vector<LabeledExample>;

/// Disjoint inner pool (per-iteration training minibatches) and validation
/// split (final selection).
struct DataSplits {
  Dataset inner_pool;
  Dataset validation;
  bool disjoint = true;
};

/// Shuffles `pool`, keeps min(budget, size) items and splits them
/// inner_fraction / (1 - inner_fraction) without overlap.
DataSplits make_splits(const Dataset& pool, std::size_t budget, double inner_fraction, RandomSource& rng);

/// Black-box task metric f(D, P(pi)) with values in [0, 1]. Implementations
/// must tolerate concurrent evaluate() calls.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual double evaluate(const Permutation& pi, std::span<const LabeledExample> dataset) = 0;
};

struct PromptTemplate {
  std::string prefix;
  std::string example_format = "Input: {input}\nAnswer: {answer}";
  std::string separator = "\n\n";
  std::string query_format = "Input: {input}\nAnswer:";

  /// Throws InvalidArgument unless each placeholder occurs exactly once.
  void validate() const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// prefix, the demonstrations in rank order, then the query, joined by the
/// template separator.
std::string assemble_prompt(const PromptTemplate& tpl, std::span<const Demonstration> examples,
                            const Permutation& pi, std::string_view query);

/// Number of item pairs ordered differently by the two permutations.
int kendall_tau_distance(const Permutation& a, const Permutation& b);

/// 1 - K(pi, target) / C(n, 2); 1 when n == 1.
double mallows_score(const Permutation& pi, const Permutation& target);

double bimodal_score(const Permutation& pi, const Permutation& target_a, const Permutation& target_b);

/// 1 iff the strings agree after trimming, ASCII case folding and stripping
/// trailing punctuation.
int exact_match_metric(std::string_view prediction, std::string_view gold);

/// 1 iff the last number in `prediction` equals `gold` within 1e-6 relative.
int numeric_answer_metric(std::string_view prediction, std::string_view gold);

using Metric = std::function<int(std::string_view prediction, std::string_view gold)>;

/// Ignores the dataset; scores by Kendall distance to a hidden target.
class MallowsScorer final : public ScoreFunction {
 public:
  explicit MallowsScorer(Permutation target) : target_(std::move(target)) {}
  double evaluate(const Permutation& pi, std::span<const LabeledExample>) override {
    return mallows_score(pi, target_);
  }
  const Permutation& target() const noexcept { return target_; }

 private:
  Permutation target_;
};

class BimodalScorer final : public ScoreFunction {
 public:
  BimodalScorer(Permutation a, Permutation b) : a_(std::move(a)), b_(std::move(b)) {}
  double evaluate(const Permutation& pi, std::span<const LabeledExample>) override {
    return bimodal_score(pi, a_, b_);
  }

 private:
  Permutation a_;
  Permutation b_;
};

class ConstantScorer final : public ScoreFunction {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double evaluate(const Permutation&, std::span<const LabeledExample>) override { return value_; }

 private:
  double value_;
};

/// Parses line-delimited JSON objects with string fields "input" and "label".
/// Blank lines are skipped; anything else malformed throws InvalidArgument.
Dataset read_dataset_jsonl(std::istream& in);
Dataset load_dataset(const std::string& path);

/// Uniformly random permutation of n items.
Permutation random_permutation(std::size_t n, RandomSource& rng);

}  // namespace plr
