#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "plr/llm_client.hpp"
#include "plr/optimizer.hpp"
#include "plr/scoring.hpp"

namespace plr {

enum class TaskKind { SyntheticMallows, SyntheticBimodal, Icl };

const char* to_string(TaskKind kind) noexcept;

struct ScoringConfig {
  std::string demonstrations_path;
  std::string dataset_path;
  std::string metric = "exact-match";  // or "numeric"
  PromptTemplate prompt;
  std::string model;
  int max_tokens = 16;
  int scoring_batch_size = 16;  // requests in flight
  int max_retries = 3;
  int backoff_ms = 1000;
  int timeout_seconds = 60;
  std::string system_prompt = "Continue the pattern. Reply with the answer only.";
  std::size_t validation_budget = 1000;
  double inner_split = 0.8;

  friend bool operator==(const ScoringConfig&, const ScoringConfig&) = default;
};

/// Everything one `plr optimize` / `plr baseline` invocation needs.
struct RunConfig {
  TaskKind task = TaskKind::SyntheticMallows;
  std::size_t items = 8;  // synthetic tasks only; icl uses the demonstration count
  OptimizerConfig optimizer;
  std::size_t topk_budget = 0;  // 0 = T * B + K
  ScoringConfig scoring;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "runs";

  /// Directory relative dataset paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  std::size_t effective_topk_budget() const;
  std::filesystem::path resolve(const std::string& path) const;
};

bool operator==(const OptimizerConfig& a, const OptimizerConfig& b);
bool operator==(const RunConfig& a, const RunConfig& b);

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);

/// Stable hex digest of the configuration (seeds and output directory excluded).
std::string config_hash(const RunConfig& cfg);

}  // namespace plr
