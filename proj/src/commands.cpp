#include "plr/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "plr/config.hpp"
#include "plr/errors.hpp"
#include "plr/llm_client.hpp"
#include "plr/optimizer.hpp"
#include "plr/oracle.hpp"
#include "plr/version.hpp"

namespace plr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Task-level streams, disjoint from the optimizer's own sub-streams.
constexpr std::uint64_t kTargetStream = 101;
constexpr std::uint64_t kSecondTargetStream = 102;
constexpr std::uint64_t kSplitStream = 103;
constexpr std::uint64_t kBaselineStream = 104;

/// Inputs shared by every seed of an icl run.
struct IclResources {
  std::vector<Demonstration> demonstrations;
  Dataset pool;
  std::shared_ptr<ScoreFunction> scorer;
};

struct TaskInstance {
  std::size_t items = 0;
  std::shared_ptr<ScoreFunction> scorer;
  DataSplits splits;
};

IclResources load_icl(const RunConfig& cfg) {
  const auto& sc = cfg.scoring;
  if (sc.demonstrations_path.empty()) throw ConfigError("icl task needs scoring.demonstrations");
  if (sc.dataset_path.empty()) throw ConfigError("icl task needs scoring.dataset");
  if (sc.model.empty()) throw ConfigError("icl task needs scoring.endpoint.model");
  IclResources res;
  for (const auto& path : {sc.demonstrations_path, sc.dataset_path}) {
    if (!fs::exists(cfg.resolve(path))) throw ConfigError("dataset file not found: " + cfg.resolve(path).string());
  }
  try {
    for (auto& ex : load_dataset(cfg.resolve(sc.demonstrations_path).string())) {
      res.demonstrations.emplace_back(std::move(ex.input), std::move(ex.label));
    }
    res.pool = load_dataset(cfg.resolve(sc.dataset_path).string());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (res.demonstrations.empty()) throw ConfigError("demonstration file is empty");
  if (res.pool.size() < 2) throw ConfigError("dataset needs at least two examples for the inner/validation split");

  EndpointConfig ep;
  ep.load_environment();
  if (ep.base_url.empty()) throw ConfigError("PLR_API_BASE is not set");
  ep.model = sc.model;
  ep.max_tokens = sc.max_tokens;
  ep.parallelism = sc.scoring_batch_size;
  ep.max_retries = sc.max_retries;
  ep.backoff = std::chrono::milliseconds(sc.backoff_ms);
  ep.timeout_seconds = sc.timeout_seconds;
  ep.system_prompt = sc.system_prompt;
  Metric metric = sc.metric == "numeric" ? Metric(numeric_answer_metric) : Metric(exact_match_metric);
  try {
    res.scorer = llm_accuracy_scorer(sc.prompt, res.demonstrations, ep, std::move(metric));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return res;
}

TaskInstance make_task(const RunConfig& cfg, std::uint64_t seed, const IclResources* icl) {
  const RandomSource root(seed);
  TaskInstance task;
  switch (cfg.task) {
    case TaskKind::SyntheticMallows: {
      RandomSource rng = root.split(kTargetStream);
      task.items = cfg.items;
      task.scorer = std::make_shared<MallowsScorer>(random_permutation(cfg.items, rng));
      break;
    }
    case TaskKind::SyntheticBimodal: {
      RandomSource rng_a = root.split(kTargetStream);
      RandomSource rng_b = root.split(kSecondTargetStream);
      task.items = cfg.items;
      task.scorer = std::make_shared<BimodalScorer>(random_permutation(cfg.items, rng_a),
                                                    random_permutation(cfg.items, rng_b));
      break;
    }
    case TaskKind::Icl: {
      RandomSource rng = root.split(kSplitStream);
      task.items = icl->demonstrations.size();
      task.scorer = icl->scorer;
      const std::size_t budget = std::min(cfg.scoring.validation_budget, icl->pool.size());
      task.splits = make_splits(icl->pool, budget, cfg.scoring.inner_split, rng);
      if (task.splits.validation.empty() || task.splits.inner_pool.empty()) {
        throw ConfigError("inner/validation split leaves an empty side; enlarge the dataset");
      }
      break;
    }
  }
  return task;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Appends one JSON object per line, flushing each so a crash leaves only
/// complete lines behind.
class TraceWriter {
 public:
  TraceWriter(const fs::path& path, bool enabled) {
    if (enabled) {
      out_.open(path, std::ios::trunc);
      if (!out_) throw std::runtime_error("cannot write " + path.string());
    }
  }
  void write(const json& j) {
    if (!out_.is_open()) return;
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  json result;
};

std::string method_name(const OptimizerConfig& opt) {
  switch (opt.update) {
    case UpdateKind::Ema: return "plr-ema";
    case UpdateKind::Mle: return "plr-1";
    case UpdateKind::EmMixture: return "plr-" + std::to_string(opt.mixture_components);
  }
  return "plr";
}

json summarize(const std::string& method, const RunConfig& cfg, const std::vector<SeedOutcome>& outcomes) {
  json results = json::array();
  json failed = json::array();
  std::vector<double> scores;
  for (const auto& o : outcomes) {
    if (o.ok) {
      results.push_back({{"seed", o.seed},
                         {"selected", o.result["selected"]},
                         {"validation_score", o.result["validation_score"]}});
      scores.push_back(o.result["validation_score"].get<double>());
    } else {
      failed.push_back({{"seed", o.seed}, {"error", o.error}});
    }
  }
  double mean = 0.0, stddev = 0.0;
  if (!scores.empty()) {
    mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    if (scores.size() > 1) {
      double ss = 0.0;
      for (double s : scores) ss += (s - mean) * (s - mean);
      stddev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
    }
  }
  return json{{"schema_version", kOutputSchemaVersion},
              {"library_version", kLibraryVersion},
              {"method", method},
              {"task", to_string(cfg.task)},
              {"config_hash", config_hash(cfg)},
              {"results", results},
              {"failed", failed},
              {"mean_score", mean},
              {"stddev_score", stddev}};
}

/// Runs `job` for every seed with up to `parallel` workers and collects outcomes in seed order.
template <class Job>
std::vector<SeedOutcome> for_each_seed(const std::vector<std::uint64_t>& seeds, int parallel, std::ostream& log,
                                       Job job) {
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::mutex log_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
      SeedOutcome& o = outcomes[i];
      o.seed = seeds[i];
      try {
        o.result = job(seeds[i]);
        o.ok = true;
        std::lock_guard lock(log_mu);
        log << "seed " << seeds[i] << ": score " << o.result["validation_score"].get<double>() << '\n';
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        o.error = e.what();
        std::lock_guard lock(log_mu);
        log << "seed " << seeds[i] << " failed: " << e.what() << '\n';
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(parallel, 1)), 1, seeds.size());
  if (workers == 1) {
    worker();
  } else {
    std::exception_ptr config_failure;
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(mu);
          if (!config_failure) config_failure = std::current_exception();
        }
      });
    }
    pool.clear();
    if (config_failure) std::rethrow_exception(config_failure);
  }
  return outcomes;
}

struct Prepared {
  RunConfig cfg;
  std::vector<std::uint64_t> seeds;
  fs::path out_dir;
  std::unique_ptr<IclResources> icl;
};

Prepared prepare(const fs::path& config_path, const CommandOptions& options) {
  Prepared p;
  p.cfg = load_config(config_path);
  if (options.seeds) {
    if (options.seeds->empty()) throw ConfigError("--seeds must list at least one seed");
    p.cfg.seeds = *options.seeds;
  }
  p.seeds = p.cfg.seeds;
  p.out_dir = options.out_dir ? *options.out_dir : fs::path(p.cfg.output_dir);
  if (p.cfg.task == TaskKind::Icl) p.icl = std::make_unique<IclResources>(load_icl(p.cfg));
  return p;
}

int finish(const std::vector<SeedOutcome>& outcomes, std::ostream& log) {
  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += o.ok ? 0 : 1;
  if (failed) {
    log << failed << " of " << outcomes.size() << " seeds failed\n";
    return kExitScoringError;
  }
  return kExitOk;
}

template <class Body>
int guarded(std::ostream& log, Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ScoringError& e) {
    log << "scoring error: " << e.what() << '\n';
    return kExitScoringError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitScoringError;
  }
}

}  // namespace

int cmd_optimize(const fs::path& config_path, const CommandOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    Prepared p = prepare(config_path, options);
    fs::create_directories(p.out_dir);
    const std::string method = method_name(p.cfg.optimizer);
    const std::string hash = config_hash(p.cfg);

    auto outcomes = for_each_seed(p.seeds, options.parallel, log, [&](std::uint64_t seed) {
      const auto started = std::chrono::steady_clock::now();
      TaskInstance task = make_task(p.cfg, seed, p.icl.get());
      OptimizerConfig opt = p.cfg.optimizer;
      opt.seed = seed;
      TraceWriter trace(p.out_dir / ("trace-" + std::to_string(seed) + ".jsonl"), options.trace);
      RunObserver observer{[&](const IterationRecord& r) { trace.write(to_json(r)); },
                           [&](const FinalRecord& r) { trace.write(to_json(r)); }};
      const RunResult res = run(task.items, opt, *task.scorer, task.splits, observer);
      const double wall =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      json result{{"schema_version", kOutputSchemaVersion},
                  {"library_version", kLibraryVersion},
                  {"method", method},
                  {"task", to_string(p.cfg.task)},
                  {"seed", seed},
                  {"items", task.items},
                  {"selected", res.selected.vector()},
                  {"validation_score", res.validation_score},
                  {"greedy_mode", greedy_mode(res.final_distribution).vector()},
                  {"final_params", to_json(res.final_distribution)},
                  {"scorer_calls", res.trace.scorer_calls},
                  {"config_hash", hash},
                  {"wall_time_ms", wall}};
      write_json(p.out_dir / ("result-" + std::to_string(seed) + ".json"), result);
      return result;
    });
    write_json(p.out_dir / "summary.json", summarize(method, p.cfg, outcomes));
    return finish(outcomes, log);
  });
}

int cmd_baseline(const fs::path& config_path, BaselineKind kind, const CommandOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    Prepared p = prepare(config_path, options);
    const std::string method = kind == BaselineKind::Static ? "static" : "topk";
    const fs::path out_dir = p.out_dir / ("baseline-" + method);
    fs::create_directories(out_dir);
    const std::string hash = config_hash(p.cfg);
    const std::size_t budget = p.cfg.effective_topk_budget();

    auto outcomes = for_each_seed(p.seeds, options.parallel, log, [&](std::uint64_t seed) {
      const auto started = std::chrono::steady_clock::now();
      TaskInstance task = make_task(p.cfg, seed, p.icl.get());
      TraceWriter trace(out_dir / ("trace-" + std::to_string(seed) + ".jsonl"), options.trace);
      BaselineResult res = [&] {
        if (kind == BaselineKind::TopK) {
          RandomSource rng = RandomSource(seed).split(kBaselineStream);
          return baseline_topk(task.items, budget, *task.scorer, task.splits, rng);
        }
        Permutation id = baseline_static(task.items);
        const double s = task.scorer->evaluate(id, task.splits.validation);
        return BaselineResult{id, s, {id}, {s}, 1};
      }();
      json draws = json::array();
      for (const auto& d : res.draws) draws.push_back(d.vector());
      trace.write({{"type", "baseline"},
                   {"method", method},
                   {"draws", draws},
                   {"scores", res.scores},
                   {"selected", res.selected.vector()},
                   {"selected_score", res.validation_score},
                   {"scorer_calls", res.scorer_calls}});
      const double wall =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      json result{{"schema_version", kOutputSchemaVersion},
                  {"library_version", kLibraryVersion},
                  {"method", method},
                  {"task", to_string(p.cfg.task)},
                  {"seed", seed},
                  {"items", task.items},
                  {"selected", res.selected.vector()},
                  {"validation_score", res.validation_score},
                  {"scorer_calls", res.scorer_calls},
                  {"budget", kind == BaselineKind::TopK ? budget : std::size_t{1}},
                  {"config_hash", hash},
                  {"wall_time_ms", wall}};
      write_json(out_dir / ("result-" + std::to_string(seed) + ".json"), result);
      return result;
    });
    write_json(out_dir / "summary.json", summarize(method, p.cfg, outcomes));
    return finish(outcomes, log);
  });
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  const auto checks = run_property_checks(options);
  print_checks(checks, out);
  const bool all = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  out << (all ? "all properties hold\n" : "property check FAILED\n");
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_enumerate(std::span<const double> logits, std::ostream& out, std::ostream& log) {
  try {
    const PLParams params(std::vector<double>(logits.begin(), logits.end()));
    const ExactDistribution dist = enumerate_pl(params);
    const auto perms = all_permutations(params.size());
    json rows = json::array();
    for (std::size_t i = 0; i < perms.size(); ++i) {
      rows.push_back({{"permutation", perms[i].vector()}, {"probability", dist[i]}});
    }
    out << json{{"items", params.size()}, {"logits", params.vector()}, {"distribution", rows}}.dump(2) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    log << "enumerate: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace plr
