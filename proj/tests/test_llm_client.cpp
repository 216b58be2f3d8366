#include <doctest.h>

#include "mock_endpoint.hpp"
#include "plr/errors.hpp"
#include "plr/llm_client.hpp"

using namespace plr;
using plr::testing::MockEndpoint;

namespace {

const std::vector<Demonstration> kDemos{{"1+1", "2"}, {"2+3", "5"}, {"4+4", "8"}};

Dataset eval_items() { return {{"3+3", "6"}, {"5+2", "7"}, {"9+1", "10"}, {"6+6", "12"}}; }

std::map<std::string, std::string> gold_map() {
  std::map<std::string, std::string> m;
  for (const auto& e : eval_items()) m[e.input] = e.label;
  return m;
}

EndpointConfig endpoint_for(const MockEndpoint& mock) {
  EndpointConfig cfg;
  cfg.base_url = mock.base_url();
  cfg.api_key = "test-key";
  cfg.model = "mock-model";
  cfg.parallelism = 4;
  cfg.backoff = std::chrono::milliseconds(1);
  cfg.timeout_seconds = 5;
  return cfg;
}

}  // namespace

TEST_CASE("split_base_url") {
  CHECK(split_base_url("https://api.example.com/v1") == std::make_pair(std::string("https://api.example.com"),
                                                                      std::string("/v1")));
  CHECK(split_base_url("http://127.0.0.1:8080") == std::make_pair(std::string("http://127.0.0.1:8080"),
                                                                  std::string()));
  CHECK(split_base_url("http://h:1/a/b/").second == "/a/b");
  CHECK_THROWS_AS(split_base_url("localhost:8080"), InvalidArgument);
}

TEST_CASE("echo-gold endpoint scores 1 for every permutation") {
  MockEndpoint mock(gold_map());
  auto scorer = llm_accuracy_scorer(PromptTemplate{}, kDemos, endpoint_for(mock), exact_match_metric);
  const Dataset items = eval_items();
  for (const auto& pi : {Permutation({0, 1, 2}), Permutation({2, 0, 1}), Permutation({1, 2, 0})}) {
    CHECK(scorer->evaluate(pi, items) == 1.0);
  }
  const auto req = mock.last_request();
  CHECK(req["model"] == "mock-model");
  CHECK(req["temperature"] == 0);
  CHECK(req["messages"][0]["role"] == "system");
  CHECK(mock.last_authorization() == "Bearer test-key");
}

TEST_CASE("fixed wrong label scores 0") {
  MockEndpoint mock(gold_map());
  mock.set_fixed_reply("banana");
  auto scorer = llm_accuracy_scorer(PromptTemplate{}, kDemos, endpoint_for(mock), exact_match_metric);
  CHECK(scorer->evaluate(Permutation({0, 1, 2}), eval_items()) == 0.0);
}

TEST_CASE("three of four correct scores 0.75") {
  MockEndpoint mock(gold_map());
  mock.set_override("9+1", "11");
  auto scorer = llm_accuracy_scorer(PromptTemplate{}, kDemos, endpoint_for(mock), numeric_answer_metric);
  CHECK(scorer->evaluate(Permutation({0, 1, 2}), eval_items()) == 0.75);
}

TEST_CASE("repeated evaluation is served from the cache") {
  MockEndpoint mock(gold_map());
  auto client = std::make_shared<ChatClient>(endpoint_for(mock));
  LlmAccuracyScorer scorer(PromptTemplate{}, kDemos, client, exact_match_metric);
  scorer.evaluate(Permutation({1, 0, 2}), eval_items());
  const std::size_t after_first = mock.requests();
  CHECK(after_first == 4);
  scorer.evaluate(Permutation({1, 0, 2}), eval_items());
  CHECK(mock.requests() == after_first);
  CHECK(client->requests_sent() == 4);
  CHECK(client->cache_size() == 4);
}

TEST_CASE("concurrent duplicate prompts share one request") {
  MockEndpoint mock(gold_map());
  auto cfg = endpoint_for(mock);
  cfg.parallelism = 8;
  ChatClient client(cfg);
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { CHECK(client.complete("Input: 3+3\nAnswer:") == "6"); });
  threads.clear();
  CHECK(mock.requests() == 1);
}

TEST_CASE("transient failures are retried") {
  MockEndpoint mock(gold_map());
  mock.fail_next(2, 500);
  ChatClient client(endpoint_for(mock));
  CHECK(client.complete("Input: 5+2\nAnswer:") == "7");
  CHECK(client.retries() == 2);
  CHECK(mock.requests() == 3);

  mock.fail_next(1, 429);
  CHECK(client.complete("Input: 6+6\nAnswer:") == "12");
  CHECK(client.retries() == 3);
}

TEST_CASE("exhausted retries raise a scoring error") {
  MockEndpoint mock(gold_map());
  mock.fail_next(100, 503);
  auto cfg = endpoint_for(mock);
  cfg.max_retries = 2;
  ChatClient client(cfg);
  CHECK_THROWS_AS(client.complete("Input: 3+3\nAnswer:"), ScoringError);
  CHECK(mock.requests() == 3);
  CHECK(client.cache_size() == 0);
}

TEST_CASE("client errors are not retried") {
  MockEndpoint mock(gold_map());
  mock.fail_next(1, 401);
  ChatClient client(endpoint_for(mock));
  CHECK_THROWS_AS(client.complete("Input: 3+3\nAnswer:"), ScoringError);
  CHECK(mock.requests() == 1);
}

TEST_CASE("malformed payloads raise a protocol error") {
  MockEndpoint mock(gold_map());
  mock.set_malformed(true);
  ChatClient client(endpoint_for(mock));
  CHECK_THROWS_AS(client.complete("Input: 3+3\nAnswer:"), ProtocolError);
}

TEST_CASE("unreachable endpoint raises a scoring error") {
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.model = "m";
  cfg.max_retries = 1;
  cfg.backoff = std::chrono::milliseconds(1);
  cfg.timeout_seconds = 1;
  ChatClient client(cfg);
  CHECK_THROWS_AS(client.complete("hi"), ScoringError);
}

TEST_CASE("scorer construction checks") {
  EndpointConfig cfg;
  cfg.model = "m";
  CHECK_THROWS_AS(ChatClient{cfg}, InvalidArgument);
  cfg.base_url = "http://127.0.0.1:1";
  CHECK_THROWS_AS(llm_accuracy_scorer(PromptTemplate{}, {}, cfg, exact_match_metric), InvalidArgument);
  auto scorer = llm_accuracy_scorer(PromptTemplate{}, kDemos, cfg, exact_match_metric);
  CHECK_THROWS_AS(scorer->evaluate(Permutation({0, 1, 2}), Dataset{}), InvalidArgument);
  CHECK_THROWS_AS(scorer->evaluate(Permutation({0, 1}), eval_items()), InvalidArgument);
}

TEST_CASE("environment overrides") {
  setenv("PLR_API_BASE", "http://env.example/v1", 1);
  setenv("PLR_API_KEY", "k", 1);
  EndpointConfig cfg;
  cfg.load_environment();
  CHECK(cfg.base_url == "http://env.example/v1");
  CHECK(cfg.api_key == "k");
  unsetenv("PLR_API_BASE");
  unsetenv("PLR_API_KEY");
}
