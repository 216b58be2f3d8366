#include "plr/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "plr/errors.hpp"

namespace plr {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

TaskKind task_from_string(const std::string& s) {
  if (s == "synthetic-mallows") return TaskKind::SyntheticMallows;
  if (s == "synthetic-bimodal") return TaskKind::SyntheticBimodal;
  if (s == "icl") return TaskKind::Icl;
  throw ConfigError("unknown task kind: " + s);
}

}  // namespace

const char* to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::SyntheticMallows: return "synthetic-mallows";
    case TaskKind::SyntheticBimodal: return "synthetic-bimodal";
    case TaskKind::Icl: return "icl";
  }
  return "unknown";
}

std::size_t RunConfig::effective_topk_budget() const {
  return topk_budget > 0 ? topk_budget : optimizer.total_budget();
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

bool operator==(const OptimizerConfig& a, const OptimizerConfig& b) {
  RunConfig ra, rb;
  ra.optimizer = a;
  rb.optimizer = b;
  return config_to_json(ra) == config_to_json(rb);
}

bool operator==(const RunConfig& a, const RunConfig& b) { return config_to_json(a) == config_to_json(b); }

RunConfig config_from_json(const json& j) {
  reject_unknown(j, "config", {"task", "protocol", "plr", "plr_1", "plr_mixture", "baseline", "scoring", "output_dir"});
  RunConfig cfg;
  auto& opt = cfg.optimizer;
  auto& sc = cfg.scoring;

  const json& task = section(j, "task");
  reject_unknown(task, "task", {"kind", "items"});
  std::string kind = to_string(cfg.task);
  read(task, "kind", kind, "task");
  cfg.task = task_from_string(kind);
  read(task, "items", cfg.items, "task");

  const json& protocol = section(j, "protocol");
  reject_unknown(protocol, "protocol", {"seeds", "validation_budget", "inner_outer_split", "scoring_batch_size"});
  read(protocol, "seeds", cfg.seeds, "protocol");
  read(protocol, "validation_budget", sc.validation_budget, "protocol");
  read(protocol, "inner_outer_split", sc.inner_split, "protocol");
  read(protocol, "scoring_batch_size", sc.scoring_batch_size, "protocol");

  const json& shared = section(j, "plr");
  reject_unknown(shared, "plr",
                 {"ce_iterations", "samples_per_iteration", "elite_fraction", "final_draws", "ema_smoothing",
                  "rank_temperature", "update", "smooth_refits", "train_minibatch", "parallelism"});
  read(shared, "ce_iterations", opt.iterations, "plr");
  read(shared, "samples_per_iteration", opt.batch, "plr");
  read(shared, "elite_fraction", opt.elite_fraction, "plr");
  read(shared, "final_draws", opt.final_draws, "plr");
  read(shared, "ema_smoothing", opt.ema.alpha, "plr");
  read(shared, "rank_temperature", opt.ema.tau, "plr");
  std::string update = to_string(opt.update);
  read(shared, "update", update, "plr");
  try {
    opt.update = update_kind_from_string(update);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  read(shared, "smooth_refits", opt.smooth_refits, "plr");
  read(shared, "train_minibatch", opt.train_minibatch, "plr");
  read(shared, "parallelism", opt.parallelism, "plr");

  const json& mle = section(j, "plr_1");
  reject_unknown(mle, "plr_1", {"adam_steps", "learning_rate", "l2_penalty", "logit_clip", "weighted_elites"});
  read(mle, "adam_steps", opt.grad.steps, "plr_1");
  read(mle, "learning_rate", opt.grad.learning_rate, "plr_1");
  read(mle, "l2_penalty", opt.grad.l2_penalty, "plr_1");
  read(mle, "logit_clip", opt.grad.clip, "plr_1");
  read(mle, "weighted_elites", opt.weighted_elites, "plr_1");
  opt.ema.clip = opt.grad.clip;

  const json& mix = section(j, "plr_mixture");
  reject_unknown(mix, "plr_mixture", {"mixture_components", "min_component_weight", "em_rounds", "init_noise"});
  read(mix, "mixture_components", opt.mixture_components, "plr_mixture");
  read(mix, "min_component_weight", opt.min_component_weight, "plr_mixture");
  read(mix, "em_rounds", opt.em_rounds, "plr_mixture");
  read(mix, "init_noise", opt.em_init_noise, "plr_mixture");

  const json& baseline = section(j, "baseline");
  reject_unknown(baseline, "baseline", {"topk_budget"});
  read(baseline, "topk_budget", cfg.topk_budget, "baseline");

  const json& scoring = section(j, "scoring");
  reject_unknown(scoring, "scoring", {"demonstrations", "dataset", "metric", "template", "endpoint"});
  read(scoring, "demonstrations", sc.demonstrations_path, "scoring");
  read(scoring, "dataset", sc.dataset_path, "scoring");
  read(scoring, "metric", sc.metric, "scoring");
  const json& tpl = section(scoring, "template");
  reject_unknown(tpl, "scoring.template", {"prefix", "example_format", "separator", "query_format"});
  read(tpl, "prefix", sc.prompt.prefix, "scoring.template");
  read(tpl, "example_format", sc.prompt.example_format, "scoring.template");
  read(tpl, "separator", sc.prompt.separator, "scoring.template");
  read(tpl, "query_format", sc.prompt.query_format, "scoring.template");
  const json& ep = section(scoring, "endpoint");
  reject_unknown(ep, "scoring.endpoint",
                 {"model", "max_tokens", "max_retries", "backoff_ms", "timeout_seconds", "system_prompt"});
  read(ep, "model", sc.model, "scoring.endpoint");
  read(ep, "max_tokens", sc.max_tokens, "scoring.endpoint");
  read(ep, "max_retries", sc.max_retries, "scoring.endpoint");
  read(ep, "backoff_ms", sc.backoff_ms, "scoring.endpoint");
  read(ep, "timeout_seconds", sc.timeout_seconds, "scoring.endpoint");
  read(ep, "system_prompt", sc.system_prompt, "scoring.endpoint");

  read(j, "output_dir", cfg.output_dir, "config");

  // Semantic validation.
  try {
    opt.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("protocol.seeds must be nonempty");
  if (cfg.task != TaskKind::Icl && cfg.items < 1) throw ConfigError("task.items must be >= 1");
  if (!(sc.inner_split > 0.0 && sc.inner_split < 1.0)) throw ConfigError("inner_outer_split must lie in (0, 1)");
  if (sc.metric != "exact-match" && sc.metric != "numeric") throw ConfigError("unknown metric: " + sc.metric);
  if (sc.scoring_batch_size < 1 || sc.max_retries < 0 || sc.backoff_ms < 0 || sc.max_tokens < 1) {
    throw ConfigError("invalid endpoint settings");
  }
  if (cfg.task == TaskKind::Icl) {
    try {
      sc.prompt.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  const auto& opt = cfg.optimizer;
  const auto& sc = cfg.scoring;
  return json{
      {"task", {{"kind", to_string(cfg.task)}, {"items", cfg.items}}},
      {"protocol",
       {{"seeds", cfg.seeds},
        {"validation_budget", sc.validation_budget},
        {"inner_outer_split", sc.inner_split},
        {"scoring_batch_size", sc.scoring_batch_size}}},
      {"plr",
       {{"ce_iterations", opt.iterations},
        {"samples_per_iteration", opt.batch},
        {"elite_fraction", opt.elite_fraction},
        {"final_draws", opt.final_draws},
        {"ema_smoothing", opt.ema.alpha},
        {"rank_temperature", opt.ema.tau},
        {"update", to_string(opt.update)},
        {"smooth_refits", opt.smooth_refits},
        {"train_minibatch", opt.train_minibatch},
        {"parallelism", opt.parallelism}}},
      {"plr_1",
       {{"adam_steps", opt.grad.steps},
        {"learning_rate", opt.grad.learning_rate},
        {"l2_penalty", opt.grad.l2_penalty},
        {"logit_clip", opt.grad.clip},
        {"weighted_elites", opt.weighted_elites}}},
      {"plr_mixture",
       {{"mixture_components", opt.mixture_components},
        {"min_component_weight", opt.min_component_weight},
        {"em_rounds", opt.em_rounds},
        {"init_noise", opt.em_init_noise}}},
      {"baseline", {{"topk_budget", cfg.topk_budget}}},
      {"scoring",
       {{"demonstrations", sc.demonstrations_path},
        {"dataset", sc.dataset_path},
        {"metric", sc.metric},
        {"template",
         {{"prefix", sc.prompt.prefix},
          {"example_format", sc.prompt.example_format},
          {"separator", sc.prompt.separator},
          {"query_format", sc.prompt.query_format}}},
        {"endpoint",
         {{"model", sc.model},
          {"max_tokens", sc.max_tokens},
          {"max_retries", sc.max_retries},
          {"backoff_ms", sc.backoff_ms},
          {"timeout_seconds", sc.timeout_seconds},
          {"system_prompt", sc.system_prompt}}}}},
      {"output_dir", cfg.output_dir},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  RunConfig cfg = config_from_json(j);
  cfg.base_dir = path.parent_path();
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j["protocol"].erase("seeds");
  j.erase("output_dir");
  const std::string canonical = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace plr
