#include "plr/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "plr/errors.hpp"

namespace plr {

using nlohmann::json;

namespace {

// Independent sub-streams of the run seed.
constexpr std::uint64_t kSamplingStream = 1;
constexpr std::uint64_t kMinibatchStream = 2;
constexpr std::uint64_t kMixtureInitStream = 3;
constexpr std::uint64_t kFinalStream = 4;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json perm_json(const Permutation& p) { return json(p.vector()); }

json perms_json(std::span<const Permutation> perms) {
  json out = json::array();
  for (const auto& p : perms) out.push_back(perm_json(p));
  return out;
}

Dataset draw_minibatch(const Dataset& pool, std::size_t size, RandomSource& rng) {
  if (pool.empty()) return {};
  if (size >= pool.size()) return pool;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + rng.uniform_index(pool.size() - i)]);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.reserve(size);
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

Distribution update_distribution(const Distribution& current, const EliteSet& raw_elites, const OptimizerConfig& cfg) {
  EliteSet elites = raw_elites;
  if (cfg.weighted_elites) {
    EliteSet weighted = raw_elites.score_weighted();
    // All-zero scores carry no preference; fall back to uniform weights.
    if (weighted.total_weight() > 0.0) elites = std::move(weighted);
  }
  const double clip = cfg.grad.clip;
  switch (cfg.update) {
    case UpdateKind::Ema:
      return ema_rank_update(std::get<PLParams>(current), elites, cfg.ema);
    case UpdateKind::Mle: {
      const auto& theta = std::get<PLParams>(current);
      PLParams fit = mle_fit(elites, theta, cfg.grad);
      return cfg.smooth_refits ? ema_blend(theta, fit, cfg.ema.alpha, clip) : center_and_clip(fit.logits(), clip);
    }
    case UpdateKind::EmMixture: {
      const auto& mix = std::get<MixturePL>(current);
      MixturePL fit = em_fit(elites, mix, cfg.grad, cfg.em_rounds, cfg.min_component_weight);
      if (!cfg.smooth_refits) return fit;
      const double a = cfg.ema.alpha;
      std::vector<double> weights(mix.num_components());
      std::vector<PLParams> comps;
      comps.reserve(mix.num_components());
      for (std::size_t k = 0; k < mix.num_components(); ++k) {
        weights[k] = (1.0 - a) * mix.weights()[k] + a * fit.weights()[k];
        comps.push_back(ema_blend(mix.component(k), fit.component(k), a, clip));
      }
      return MixturePL(floor_and_normalize(weights, cfg.min_component_weight), std::move(comps),
                       cfg.min_component_weight);
    }
  }
  throw InvalidArgument("unknown update kind");
}

FinalRecord final_select_memo(const Distribution& dist, int k_draws, MemoizedScorer& memo,
                              std::span<const LabeledExample> validation, RandomSource& rng) {
  if (k_draws < 1) throw InvalidArgument("final_select: k_draws must be >= 1");
  std::vector<Permutation> draws;
  draws.reserve(static_cast<std::size_t>(k_draws));
  for (int k = 0; k < k_draws; ++k) draws.push_back(draw(dist, rng));

  // Distinct candidates in first-occurrence order.
  std::vector<Permutation> unique;
  for (const auto& d : draws) {
    if (std::find(unique.begin(), unique.end(), d) == unique.end()) unique.push_back(d);
  }
  const auto unique_scores = memo.score_batch(unique, validation);

  std::vector<double> scores;
  scores.reserve(draws.size());
  for (const auto& d : draws) {
    const auto pos = std::find(unique.begin(), unique.end(), d) - unique.begin();
    scores.push_back(unique_scores[static_cast<std::size_t>(pos)]);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < unique.size(); ++i) {
    if (unique_scores[i] > unique_scores[best]) best = i;
  }
  return FinalRecord{std::move(draws), std::move(scores), unique[best], unique_scores[best]};
}

}  // namespace

const char* to_string(UpdateKind kind) noexcept {
  switch (kind) {
    case UpdateKind::Ema: return "ema";
    case UpdateKind::Mle: return "mle";
    case UpdateKind::EmMixture: return "em-mixture";
  }
  return "unknown";
}

UpdateKind update_kind_from_string(std::string_view name) {
  if (name == "ema") return UpdateKind::Ema;
  if (name == "mle" || name == "mle-1") return UpdateKind::Mle;
  if (name == "em-mixture" || name == "em") return UpdateKind::EmMixture;
  throw InvalidArgument("unknown update kind: " + std::string(name));
}

std::size_t OptimizerConfig::elite_count() const {
  return static_cast<std::size_t>(std::ceil(elite_fraction * static_cast<double>(batch) - 1e-12));
}

std::size_t OptimizerConfig::total_budget() const {
  return static_cast<std::size_t>(iterations) * static_cast<std::size_t>(batch) +
         static_cast<std::size_t>(final_draws);
}

void OptimizerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("optimizer config: " + msg); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) fail("elite_fraction must lie in (0, 1]");
  if (elite_count() < 1) fail("ceil(rho * B) must be >= 1");
  if (final_draws < 1) fail("final_draws must be >= 1");
  if (mixture_components < 1) fail("mixture_components must be >= 1");
  if (static_cast<double>(mixture_components) * min_component_weight > 1.0) fail("min_component_weight too large");
  if (em_rounds < 1) fail("em_rounds must be >= 1");
  if (!(ema.alpha >= 0.0 && ema.alpha <= 1.0)) fail("ema alpha must lie in [0, 1]");
  if (!(ema.tau > 0.0)) fail("rank temperature must be positive");
  if (grad.steps < 1 || !(grad.learning_rate > 0.0) || grad.l2_penalty < 0.0 || !(grad.clip > 0.0)) {
    fail("invalid gradient settings");
  }
  if (train_minibatch < 1) fail("train_minibatch must be >= 1");
  if (parallelism < 1) fail("parallelism must be >= 1");
}

Permutation draw(const Distribution& dist, RandomSource& rng) {
  return std::visit(overloaded{[&](const PLParams& p) { return sample(p, rng); },
                               [&](const MixturePL& m) { return mixture_sample(m, rng); }},
                    dist);
}

double distribution_log_prob(const Distribution& dist, const Permutation& pi) {
  return std::visit(overloaded{[&](const PLParams& p) { return log_prob(p, pi); },
                               [&](const MixturePL& m) { return mixture_log_prob(m, pi); }},
                    dist);
}

std::size_t distribution_items(const Distribution& dist) {
  return std::visit(overloaded{[](const PLParams& p) { return p.size(); },
                               [](const MixturePL& m) { return m.num_items(); }},
                    dist);
}

Permutation greedy_mode(const Distribution& dist) {
  if (const auto* p = std::get_if<PLParams>(&dist)) return mode(*p);
  const auto& mix = std::get<MixturePL>(dist);
  Permutation best = mode(mix.component(0));
  double best_lp = mixture_log_prob(mix, best);
  for (std::size_t k = 1; k < mix.num_components(); ++k) {
    Permutation cand = mode(mix.component(k));
    const double lp = mixture_log_prob(mix, cand);
    if (lp > best_lp) {
      best = std::move(cand);
      best_lp = lp;
    }
  }
  return best;
}

json to_json(const Distribution& dist) {
  json logits = json::array();
  json weights = json::array();
  if (const auto* p = std::get_if<PLParams>(&dist)) {
    logits.push_back(p->vector());
    weights.push_back(1.0);
  } else {
    const auto& mix = std::get<MixturePL>(dist);
    for (std::size_t k = 0; k < mix.num_components(); ++k) {
      logits.push_back(mix.component(k).vector());
      weights.push_back(mix.weights()[k]);
    }
  }
  return json{{"weights", weights}, {"logits", logits}};
}

json to_json(const IterationRecord& rec) {
  return json{{"type", "iteration"},       {"iteration", rec.iteration},
              {"samples", perms_json(rec.samples)}, {"scores", rec.scores},
              {"elites", rec.elites},      {"params", to_json(rec.params)},
              {"wall_ms", rec.wall_ms},    {"scorer_calls", rec.scorer_calls}};
}

json to_json(const FinalRecord& rec) {
  return json{{"type", "final"},
              {"draws", perms_json(rec.draws)},
              {"scores", rec.scores},
              {"selected", perm_json(rec.selected)},
              {"selected_score", rec.selected_score}};
}

std::uint64_t dataset_fingerprint(std::span<const LabeledExample> dataset) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;  // field terminator
    h *= 1099511628211ULL;
  };
  for (const auto& ex : dataset) {
    mix(ex.input);
    mix(ex.label);
  }
  return h;
}

double MemoizedScorer::score(const Permutation& pi, std::span<const LabeledExample> dataset) {
  return score_batch(std::span<const Permutation>(&pi, 1), dataset).front();
}

std::vector<double> MemoizedScorer::score_batch(std::span<const Permutation> perms,
                                                std::span<const LabeledExample> dataset) {
  const std::uint64_t key = dataset_fingerprint(dataset);
  std::vector<Permutation> todo;
  for (const auto& p : perms) {
    if (cache_.count({key, p}) == 0 && std::find(todo.begin(), todo.end(), p) == todo.end()) todo.push_back(p);
  }

  std::vector<double> fresh(todo.size(), 0.0);
  if (parallelism_ <= 1 || todo.size() <= 1) {
    for (std::size_t i = 0; i < todo.size(); ++i) fresh[i] = inner_.evaluate(todo[i], dataset);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < todo.size(); i = next.fetch_add(1)) {
        try {
          fresh[i] = inner_.evaluate(todo[i], dataset);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      const auto workers = std::min<std::size_t>(todo.size(), static_cast<std::size_t>(parallelism_));
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
  }
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!std::isfinite(fresh[i])) throw ScoringError("scorer returned a non-finite score for " + todo[i].to_string());
    cache_.emplace(std::make_pair(key, todo[i]), fresh[i]);
  }
  calls_ += todo.size();

  std::vector<double> out;
  out.reserve(perms.size());
  for (const auto& p : perms) out.push_back(cache_.at({key, p}));
  return out;
}

std::vector<std::size_t> select_elite_indices(std::span<const double> scores, double rho) {
  if (scores.empty()) throw InvalidArgument("select_elites: empty batch");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("select_elites: rho must lie in (0, 1]");
  const auto count = std::min(
      scores.size(),
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(scores.size()) - 1e-12))));
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(count);
  return idx;
}

EliteSet select_elites(std::span<const Permutation> samples, std::span<const double> scores, double rho) {
  if (samples.size() != scores.size()) throw InvalidArgument("select_elites: samples/scores length mismatch");
  std::vector<EliteMember> members;
  for (auto i : select_elite_indices(scores, rho)) members.push_back({samples[i], scores[i], 1.0});
  return EliteSet(std::move(members));
}

RunResult run(std::size_t num_items, const OptimizerConfig& cfg, ScoreFunction& scorer, const DataSplits& splits,
              const RunObserver& observer) {
  if (num_items == 0) throw InvalidArgument("run: need at least one item");
  cfg.validate();

  MemoizedScorer memo(scorer, cfg.parallelism);
  const RandomSource root(cfg.seed);
  RandomSource sampling = root.split(kSamplingStream);
  RandomSource minibatch_rng = root.split(kMinibatchStream);
  RandomSource final_rng = root.split(kFinalStream);

  Distribution dist = PLParams::uniform(num_items);
  if (cfg.update == UpdateKind::EmMixture) {
    RandomSource init_rng = root.split(kMixtureInitStream);
    dist = perturbed_mixture(PLParams::uniform(num_items), static_cast<std::size_t>(cfg.mixture_components),
                             cfg.em_init_noise, init_rng, cfg.grad.clip);
  }

  ScoredTrace trace;
  if (num_items > 1) {
    for (int t = 0; t < cfg.iterations; ++t) {
      const auto started = std::chrono::steady_clock::now();
      const Dataset train = draw_minibatch(splits.inner_pool, cfg.train_minibatch, minibatch_rng);

      std::vector<Permutation> samples;
      samples.reserve(static_cast<std::size_t>(cfg.batch));
      for (int b = 0; b < cfg.batch; ++b) samples.push_back(draw(dist, sampling));

      std::vector<double> scores;
      try {
        scores = memo.score_batch(samples, train);
      } catch (const ScoringError& e) {
        throw ScoringError(std::string("iteration ") + std::to_string(t) + ": " + e.what(), t);
      }

      const auto elite_idx = select_elite_indices(scores, cfg.elite_fraction);
      std::vector<EliteMember> members;
      for (auto i : elite_idx) members.push_back({samples[i], scores[i], 1.0});
      dist = update_distribution(dist, EliteSet(std::move(members)), cfg);

      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      trace.iterations.push_back(
          IterationRecord{t, std::move(samples), std::move(scores), elite_idx, dist, ms, memo.calls()});
      if (observer.on_iteration) observer.on_iteration(trace.iterations.back());
    }
  }

  FinalRecord fin = [&] {
    try {
      if (num_items == 1) return final_select_memo(dist, 1, memo, splits.validation, final_rng);
      return final_select_memo(dist, cfg.final_draws, memo, splits.validation, final_rng);
    } catch (const ScoringError& e) {
      throw ScoringError(std::string("final selection: ") + e.what(), cfg.iterations);
    }
  }();
  trace.final = fin;
  trace.scorer_calls = memo.calls();
  if (observer.on_final) observer.on_final(fin);

  return RunResult{fin.selected, fin.selected_score, std::move(trace), std::move(dist)};
}

FinalRecord final_select(const Distribution& dist, int k_draws, ScoreFunction& scorer,
                         std::span<const LabeledExample> validation, RandomSource& rng) {
  MemoizedScorer memo(scorer);
  return final_select_memo(dist, k_draws, memo, validation, rng);
}

Permutation baseline_static(std::size_t n) { return Permutation::identity(n); }

BaselineResult baseline_topk(std::size_t n, std::size_t budget, ScoreFunction& scorer, const DataSplits& splits,
                             RandomSource& rng) {
  if (budget < 1) throw InvalidArgument("baseline_topk: budget must be >= 1");
  const PLParams uniform = PLParams::uniform(n);
  MemoizedScorer memo(scorer);
  std::vector<Permutation> draws = sample_batch(uniform, budget, rng);
  std::vector<double> scores = memo.score_batch(draws, splits.validation);
  std::size_t best = 0;
  for (std::size_t i = 1; i < draws.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return BaselineResult{draws[best], scores[best], std::move(draws), std::move(scores), memo.calls()};
}

}  // namespace plr
