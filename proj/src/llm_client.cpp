#include "plr/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "plr/errors.hpp"

namespace plr {

using nlohmann::json;

void EndpointConfig::load_environment() {
  if (const char* base = std::getenv("PLR_API_BASE"); base && *base) base_url = base;
  if (const char* key = std::getenv("PLR_API_KEY"); key && *key) api_key = key;
}

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint base URL needs a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  std::string host = base_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? std::string{} : base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {host, path};
}

ChatClient::ChatClient(EndpointConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(std::clamp(cfg_.parallelism, 1, 1024)) {
  if (cfg_.base_url.empty()) throw InvalidArgument("endpoint base URL is empty (set PLR_API_BASE)");
  if (cfg_.model.empty()) throw InvalidArgument("endpoint model id is empty");
  if (cfg_.max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
  auto [host, prefix] = split_base_url(cfg_.base_url);
  host_ = std::move(host);
  path_ = prefix + "/chat/completions";
}

std::size_t ChatClient::cache_size() const {
  std::lock_guard lock(cache_mu_);
  return cache_.size();
}

std::string ChatClient::complete(const std::string& prompt) {
  auto key = std::make_pair(cfg_.model, prompt);
  std::promise<std::string> promise;
  std::shared_future<std::string> fut;
  bool owner = false;
  {
    std::lock_guard lock(cache_mu_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      fut = promise.get_future().share();
      cache_.emplace(key, fut);
      owner = true;
    } else {
      fut = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(fetch(prompt));
    } catch (...) {
      // Failed lookups are not cached; a later call may retry.
      {
        std::lock_guard lock(cache_mu_);
        cache_.erase(key);
      }
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

std::string ChatClient::post_once(const std::string& body, int& status, bool& transport_error) {
  httplib::Client cli(host_);
  cli.set_connection_timeout(cfg_.timeout_seconds, 0);
  cli.set_read_timeout(cfg_.timeout_seconds, 0);
  cli.set_write_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  requests_.fetch_add(1);
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    transport_error = true;
    status = 0;
    return httplib::to_string(res.error());
  }
  transport_error = false;
  status = res->status;
  return res->body;
}

std::string ChatClient::fetch(const std::string& prompt) {
  const json request = {
      {"model", cfg_.model},
      {"messages",
       json::array({{{"role", "system"}, {"content", cfg_.system_prompt}}, {{"role", "user"}, {"content", prompt}}})},
      {"temperature", 0},
      {"max_tokens", cfg_.max_tokens},
  };
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      retries_.fetch_add(1);
      std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
    }
    int status = 0;
    bool transport_error = false;
    std::string payload;
    {
      in_flight_.acquire();
      try {
        payload = post_once(body, status, transport_error);
      } catch (...) {
        in_flight_.release();
        throw;
      }
      in_flight_.release();
    }
    if (transport_error) {
      last_error = "transport error: " + payload;
      continue;
    }
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw ScoringError("endpoint rejected request with HTTP " + std::to_string(status) + ": " + payload);
    }
    json parsed = json::parse(payload, nullptr, false);
    if (parsed.is_discarded()) throw ProtocolError("endpoint returned invalid JSON");
    try {
      const auto& content = parsed.at("choices").at(0).at("message").at("content");
      if (content.is_null()) return {};
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("unexpected chat-completions payload: ") + e.what());
    }
  }
  throw ScoringError("endpoint request failed after " + std::to_string(cfg_.max_retries + 1) +
                     " attempts: " + last_error);
}

LlmAccuracyScorer::LlmAccuracyScorer(PromptTemplate tpl, std::vector<Demonstration> examples,
                                     std::shared_ptr<ChatClient> client, Metric metric)
    : tpl_(std::move(tpl)), examples_(std::move(examples)), client_(std::move(client)), metric_(std::move(metric)) {
  tpl_.validate();
  if (examples_.empty()) throw InvalidArgument("LLM scorer needs at least one demonstration");
  if (!client_) throw InvalidArgument("LLM scorer needs a client");
  if (!metric_) throw InvalidArgument("LLM scorer needs a metric");
}

double LlmAccuracyScorer::evaluate(const Permutation& pi, std::span<const LabeledExample> dataset) {
  if (dataset.empty()) throw InvalidArgument("cannot score on an empty dataset");
  if (pi.size() != examples_.size()) throw InvalidArgument("permutation size does not match demonstration count");

  std::vector<int> correct(dataset.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      try {
        const std::string prompt = assemble_prompt(tpl_, examples_, pi, dataset[i].input);
        correct[i] = metric_(client_->complete(prompt), dataset[i].label);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(dataset.size(), static_cast<std::size_t>(std::max(1, client_->config().parallelism)));
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);

  double total = 0.0;
  for (int c : correct) total += c;
  return total / static_cast<double>(dataset.size());
}

std::shared_ptr<ScoreFunction> llm_accuracy_scorer(PromptTemplate tpl, std::vector<Demonstration> examples,
                                                   const EndpointConfig& endpoint, Metric metric) {
  return std::make_shared<LlmAccuracyScorer>(std::move(tpl), std::move(examples),
                                             std::make_shared<ChatClient>(endpoint), std::move(metric));
}

}  // namespace plr
