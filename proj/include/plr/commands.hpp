#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "plr/verify.hpp"

namespace plr {

/// Process exit codes shared by all subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfigError = 2,
  kExitScoringError = 3,
};

struct CommandOptions {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::filesystem::path> out_dir;
  int parallel = 1;
  bool trace = true;
};

enum class BaselineKind { Static, TopK };

/// Runs the optimizer once per seed. Writes trace-{seed}.jsonl,
/// result-{seed}.json and summary.json into the output directory.
int cmd_optimize(const std::filesystem::path& config_path, const CommandOptions& options, std::ostream& log);

/// Same protocol for a baseline; output goes to <out>/baseline-<kind>/.
int cmd_baseline(const std::filesystem::path& config_path, BaselineKind kind, const CommandOptions& options,
                 std::ostream& log);

/// Runs every oracle-backed property check and prints a pass/fail table.
int cmd_verify(const VerifyOptions& options, std::ostream& out);

/// Prints the exact PL distribution for the given logits (n <= 8) as JSON.
int cmd_enumerate(std::span<const double> logits, std::ostream& out, std::ostream& log);

}  // namespace plr
