#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "plr/estimation.hpp"
#include "plr/pl.hpp"
#include "plr/scoring.hpp"

namespace plr {

enum class UpdateKind { Ema, Mle, EmMixture };

const char* to_string(UpdateKind kind) noexcept;
UpdateKind update_kind_from_string(std::string_view name);

/// Cross-entropy loop settings.
struct OptimizerConfig {
  int iterations = 15;          // T
  int batch = 15;               // B
  double elite_fraction = 0.2;  // rho
  int final_draws = 10;         // K
  UpdateKind update = UpdateKind::Ema;
  int mixture_components = 4;
  double min_component_weight = kMinComponentWeight;
  int em_rounds = 3;
  double em_init_noise = 0.5;
  EMAConfig ema;
  GradientFitConfig grad;
  bool weighted_elites = false;
  /// Blend MLE / EM refits into the previous parameters with ema.alpha.
  bool smooth_refits = true;
  std::uint64_t seed = 0;
  std::size_t train_minibatch = 200;
  /// Upper bound on concurrent scorer calls within one batch.
  int parallelism = 1;

  std::size_t elite_count() const;
  /// Scoring budget of one run: T * B + K.
  std::size_t total_budget() const;
  void validate() const;
};

/// A single PL or a mixture; which one the loop maintains depends on UpdateKind.
using Distribution = std::variant<PLParams, MixturePL>;

Permutation draw(const Distribution& dist, RandomSource& rng);
double distribution_log_prob(const Distribution& dist, const Permutation& pi);
std::size_t distribution_items(const Distribution& dist);
/// Most probable component mode; diagnostic only, never a final candidate.
Permutation greedy_mode(const Distribution& dist);

struct IterationRecord {
  int iteration = 0;
  std::vector<Permutation> samples;
  std::vector<double> scores;
  std::vector<std::size_t> elites;
  Distribution params;
  double wall_ms = 0.0;
  /// Cumulative scorer invocations at the end of this iteration.
  std::size_t scorer_calls = 0;
};

struct FinalRecord {
  std::vector<Permutation> draws;
  std::vector<double> scores;
  Permutation selected;
  double selected_score = 0.0;
};

struct ScoredTrace {
  std::vector<IterationRecord> iterations;
  std::optional<FinalRecord> final;
  std::size_t scorer_calls = 0;
};

nlohmann::json to_json(const Distribution& dist);
nlohmann::json to_json(const IterationRecord& rec);
nlohmann::json to_json(const FinalRecord& rec);

/// Memoizes scores by (data split contents, permutation) and counts the calls
/// that reach the wrapped scorer.
class MemoizedScorer {
 public:
  explicit MemoizedScorer(ScoreFunction& inner, int parallelism = 1) : inner_(inner), parallelism_(parallelism) {}

  double score(const Permutation& pi, std::span<const LabeledExample> dataset);

  /// Scores a batch; distinct uncached permutations are evaluated concurrently
  /// (up to the parallelism bound) and the cache is filled after all finish.
  std::vector<double> score_batch(std::span<const Permutation> perms, std::span<const LabeledExample> dataset);

  std::size_t calls() const noexcept { return calls_; }

 private:
  ScoreFunction& inner_;
  int parallelism_;
  std::map<std::pair<std::uint64_t, Permutation>, double> cache_;
  std::size_t calls_ = 0;
};

std::uint64_t dataset_fingerprint(std::span<const LabeledExample> dataset);

/// Indices of the ceil(rho * B) best scores; ties go to the earlier sample.
std::vector<std::size_t> select_elite_indices(std::span<const double> scores, double rho);

EliteSet select_elites(std::span<const Permutation> samples, std::span<const double> scores, double rho);

struct RunResult {
  Permutation selected;
  double validation_score = 0.0;
  ScoredTrace trace;
  Distribution final_distribution;
};

struct RunObserver {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const FinalRecord&)> on_final;
};

/// The full PLR loop over `num_items` demonstrations.
RunResult run(std::size_t num_items, const OptimizerConfig& cfg, ScoreFunction& scorer, const DataSplits& splits,
              const RunObserver& observer = {});

/// Draws k permutations, scores each distinct one once on `validation` and
/// returns the best (earliest draw on ties).
FinalRecord final_select(const Distribution& dist, int k_draws, ScoreFunction& scorer,
                         std::span<const LabeledExample> validation, RandomSource& rng);

Permutation baseline_static(std::size_t n);

struct BaselineResult {
  Permutation selected;
  double validation_score = 0.0;
  std::vector<Permutation> draws;
  std::vector<double> scores;
  std::size_t scorer_calls = 0;
};

/// Best of `budget` uniformly drawn permutations, scored on the validation split.
BaselineResult baseline_topk(std::size_t n, std::size_t budget, ScoreFunction& scorer, const DataSplits& splits,
                             RandomSource& rng);

}  // namespace plr
