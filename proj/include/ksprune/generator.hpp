#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ksprune {

struct SamplingConfig {
  double temperature = 0.8;
  int top_k = 50;
  int max_tokens = 64;
  std::optional<std::uint64_t> seed;

  nlohmann::json to_json() const;
};

/// The query a bundle answers. `row_index` is absent for ad-hoc queries.
struct GenerationRequest {
  std::string dataset_id;
  std::optional<std::size_t> row_index;
  std::string context;
  std::string question;
  std::string correct_answer;
};

/// Primary answer plus m resampled answers, as raw model text.
struct GenerationBundle {
  GenerationRequest query;
  std::string a_o;
  std::vector<std::string> samples;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Produces one answer per call. `draw` 0 is the primary answer A_o and
/// 1..m are the resamples.
class AnswerGenerator {
 public:
  virtual ~AnswerGenerator() = default;
  virtual std::string model_id() const = 0;
  virtual std::string generate(const GenerationRequest& request, std::size_t draw) = 0;
};

/// Default prompt: chat-style user turn holding context then question.
inline constexpr const char* kDefaultPromptTemplate = "<|user|>\n{context}\n{question}";

/// Substitutes {context} and {question}.
std::string render_prompt(const std::string& prompt_template, const GenerationRequest& request);

/// Replays recorded bundles from JSONL:
/// {"dataset_id", "row_index", "context", "question", "correct_answer", "a_o", "samples": [...]}.
/// Entries are matched by (dataset_id, row_index) when present, otherwise by
/// question text.
class FixtureGenerator : public AnswerGenerator {
 public:
  explicit FixtureGenerator(const std::filesystem::path& path);
  explicit FixtureGenerator(std::vector<GenerationBundle> bundles);

  std::string model_id() const override { return "recorded-fixture"; }
  std::string generate(const GenerationRequest& request, std::size_t draw) override;

  const std::vector<GenerationBundle>& bundles() const { return bundles_; }
  /// Number of bad lines skipped while loading.
  std::size_t skipped() const { return skipped_; }

 private:
  const GenerationBundle& find(const GenerationRequest& request) const;

  std::vector<GenerationBundle> bundles_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> by_ref_;
  std::map<std::string, std::size_t> by_question_;
  std::size_t skipped_ = 0;
};

/// Parses one fixture line.
GenerationBundle bundle_from_json(const nlohmann::json& j);
nlohmann::json bundle_to_json(const GenerationBundle& bundle);

struct ChatGeneratorOptions {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model = "default";
  std::string api_key;  // sent as a bearer token when non-empty
  std::string prompt_template = kDefaultPromptTemplate;
  SamplingConfig sampling;
  int attempts = 3;
  std::chrono::milliseconds backoff{500};
  double requests_per_second = 0.0;  // 0 = unlimited
  double timeout_seconds = 120.0;
};

/// OpenAI-compatible `POST /v1/chat/completions` client. Transport failures
/// throw TransportError after retries; an empty completion is returned as "".
class ChatCompletionGenerator : public AnswerGenerator {
 public:
  explicit ChatCompletionGenerator(ChatGeneratorOptions options);

  std::string model_id() const override { return options_.model; }
  std::string generate(const GenerationRequest& request, std::size_t draw) override;

 private:
  void throttle();

  ChatGeneratorOptions options_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Issues 1 + m generation calls and records them with metadata.
GenerationBundle generate_bundle(AnswerGenerator& generator, const GenerationRequest& request, std::size_t m,
                                 const SamplingConfig& sampling = {});

}  // namespace ksprune
