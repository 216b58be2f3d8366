#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "plr/scoring.hpp"

namespace plr {

/// Connection and decoding settings for an OpenAI-compatible endpoint.
struct EndpointConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model;
  int max_tokens = 16;
  int parallelism = 16;
  int max_retries = 3;
  std::chrono::milliseconds backoff{1000};
  int timeout_seconds = 60;
  std::string system_prompt = "Continue the pattern. Reply with the answer only.";

  /// Fills base_url and api_key from PLR_API_BASE / PLR_API_KEY when set.
  void load_environment();
};

/// Chat-completions client with retries, a bound on requests in flight and a
/// completion cache keyed by (model, prompt). Concurrent requests for the same
/// key share one network call.
class ChatClient {
 public:
  explicit ChatClient(EndpointConfig cfg);
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  /// Completion text for `prompt` at temperature 0.
  std::string complete(const std::string& prompt);

  const EndpointConfig& config() const noexcept { return cfg_; }

  /// HTTP requests issued, including retries.
  std::size_t requests_sent() const noexcept { return requests_.load(); }
  std::size_t retries() const noexcept { return retries_.load(); }
  std::size_t cache_size() const;

 private:
  std::string fetch(const std::string& prompt);
  std::string post_once(const std::string& body, int& status, bool& transport_error);

  EndpointConfig cfg_;
  std::string host_;  // scheme://host:port
  std::string path_;  // path prefix + /chat/completions
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> retries_{0};
  mutable std::mutex cache_mu_;
  std::map<std::pair<std::string, std::string>, std::shared_future<std::string>> cache_;
};

/// Splits "scheme://host:port/prefix" into ("scheme://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

/// Accuracy of the model on `dataset` when prompted with the demonstrations in
/// pi order.
class LlmAccuracyScorer final : public ScoreFunction {
 public:
  LlmAccuracyScorer(PromptTemplate tpl, std::vector<Demonstration> examples, std::shared_ptr<ChatClient> client,
                    Metric metric);

  double evaluate(const Permutation& pi, std::span<const LabeledExample> dataset) override;

  const ChatClient& client() const noexcept { return *client_; }

 private:
  PromptTemplate tpl_;
  std::vector<Demonstration> examples_;
  std::shared_ptr<ChatClient> client_;
  Metric metric_;
};

std::shared_ptr<ScoreFunction> llm_accuracy_scorer(PromptTemplate tpl, std::vector<Demonstration> examples,
                                                   const EndpointConfig& endpoint, Metric metric);

}  // namespace plr
