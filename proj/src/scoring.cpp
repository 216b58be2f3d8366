#include "plr/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>

#include <json.hpp>

#include "plr/errors.hpp"

namespace plr {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string replace_once(std::string_view text, std::string_view key, std::string_view value) {
  std::string out(text);
  const auto pos = out.find(key);
  if (pos != std::string::npos) out.replace(pos, key.size(), value);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string normalize_label(std::string_view s) {
  std::string out(trim(s));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
  return std::string(trim(out));
}

}  // namespace

Demonstration::Demonstration(std::string in, std::string ans) : input(std::move(in)), answer(std::move(ans)) {
  if (input.empty() || answer.empty()) throw InvalidArgument("demonstration input and answer must be nonempty");
}

DataSplits make_splits(const Dataset& pool, std::size_t budget, double inner_fraction, RandomSource& rng) {
  if (!(inner_fraction > 0.0 && inner_fraction < 1.0)) throw InvalidArgument("inner fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  }
  idx.resize(std::min(budget, pool.size()));
  const auto inner_count = static_cast<std::size_t>(std::floor(inner_fraction * static_cast<double>(idx.size())));
  DataSplits s;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    (j < inner_count ? s.inner_pool : s.validation).push_back(pool[idx[j]]);
  }
  return s;
}

void PromptTemplate::validate() const {
  if (count_occurrences(example_format, "{input}") != 1 || count_occurrences(example_format, "{answer}") != 1) {
    throw InvalidArgument("example_format must contain {input} and {answer} exactly once");
  }
  if (count_occurrences(query_format, "{input}") != 1) {
    throw InvalidArgument("query_format must contain {input} exactly once");
  }
}

std::string assemble_prompt(const PromptTemplate& tpl, std::span<const Demonstration> examples,
                            const Permutation& pi, std::string_view query) {
  if (examples.size() != pi.size()) {
    throw InvalidArgument("assemble_prompt: " + std::to_string(examples.size()) + " examples vs permutation of " +
                          std::to_string(pi.size()));
  }
  std::string out = tpl.prefix;
  for (int item : pi.items()) {
    const auto& ex = examples[item];
    // Positional substitution: placeholder text inside an input is left alone.
    const auto pos_in = tpl.example_format.find("{input}");
    const auto pos_ans = tpl.example_format.find("{answer}");
    std::string block;
    if (pos_in < pos_ans) {
      block = tpl.example_format.substr(0, pos_in) + ex.input +
              tpl.example_format.substr(pos_in + 7, pos_ans - pos_in - 7) + ex.answer +
              tpl.example_format.substr(pos_ans + 8);
    } else {
      block = tpl.example_format.substr(0, pos_ans) + ex.answer +
              tpl.example_format.substr(pos_ans + 8, pos_in - pos_ans - 8) + ex.input +
              tpl.example_format.substr(pos_in + 7);
    }
    out += tpl.separator;
    out += block;
  }
  out += tpl.separator;
  out += replace_once(tpl.query_format, "{input}", query);
  return out;
}

int kendall_tau_distance(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw InvalidArgument("kendall_tau_distance: size mismatch");
  const auto rank_b = b.ranks();
  int discordant = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      // a places a[i] before a[j]; discordant if b reverses them.
      if (rank_b[a[i]] > rank_b[a[j]]) ++discordant;
    }
  }
  return discordant;
}

double mallows_score(const Permutation& pi, const Permutation& target) {
  const std::size_t n = pi.size();
  if (n != target.size()) throw InvalidArgument("mallows_score: size mismatch");
  if (n < 2) return 1.0;
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return 1.0 - static_cast<double>(kendall_tau_distance(pi, target)) / pairs;
}

double bimodal_score(const Permutation& pi, const Permutation& target_a, const Permutation& target_b) {
  return std::max(mallows_score(pi, target_a), mallows_score(pi, target_b));
}

int exact_match_metric(std::string_view prediction, std::string_view gold) {
  return normalize_label(prediction) == normalize_label(gold) ? 1 : 0;
}

int numeric_answer_metric(std::string_view prediction, std::string_view gold) {
  static const std::regex number(R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)");
  auto parse = [](std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    return std::stod(s);
  };
  const std::string gold_s(trim(gold));
  std::smatch gm;
  if (!std::regex_match(gold_s, gm, number)) throw InvalidArgument("numeric gold answer does not parse: " + gold_s);
  const double expected = parse(gold_s);

  const std::string text(prediction);
  std::string last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (last.empty()) return 0;
  const double got = parse(last);
  if (got == expected) return 1;
  return std::abs(got - expected) <= 1e-6 * std::max(std::abs(got), std::abs(expected)) ? 1 : 0;
}

Dataset read_dataset_jsonl(std::istream& in) {
  Dataset out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("input") || !j.contains("label") ||
        !j["input"].is_string() || !j["label"].is_string()) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) + ": expected {\"input\": str, \"label\": str}");
    }
    out.push_back({j["input"].get<std::string>(), j["label"].get<std::string>()});
  }
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open dataset file: " + path);
  return read_dataset_jsonl(in);
}

Permutation random_permutation(std::size_t n, RandomSource& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return Permutation(std::move(order));
}

}  // namespace plr
