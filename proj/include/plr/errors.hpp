#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace plr {

/// Precondition violations: dimension mismatches, empty inputs, bad indices.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values encountered during fitting.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumeration requested beyond the supported item count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dense-mixture construction could not reach the requested accuracy.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scorer gave up (e.g. exhausted retries). Carries the CE iteration when
/// raised from inside the optimizer loop.
class ScoringError : public std::runtime_error {
 public:
  explicit ScoringError(const std::string& what, std::optional<int> iteration = std::nullopt)
      : std::runtime_error(what), iteration_(iteration) {}

  std::optional<int> iteration() const noexcept { return iteration_; }

 private:
  std::optional<int> iteration_;
};

/// The endpoint answered, but not with a chat-completions payload we understand.
class ProtocolError : public ScoringError {
 public:
  using ScoringError::ScoringError;
};

}  // namespace plr
