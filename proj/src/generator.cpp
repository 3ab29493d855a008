#include "ksprune/generator.hpp"

#include <ctime>
#include <fstream>
#include <thread>

#include <spdlog/fmt/chrono.h>
#include <spdlog/spdlog.h>

#include "http_transport.hpp"
#include "ksprune/errors.hpp"

namespace ksprune {

nlohmann::json SamplingConfig::to_json() const {
  nlohmann::json j = {{"temperature", temperature}, {"top_k", top_k}, {"max_tokens", max_tokens}};
  if (seed) j["seed"] = *seed;
  return j;
}

std::string render_prompt(const std::string& prompt_template, const GenerationRequest& request) {
  std::string out;
  out.reserve(prompt_template.size() + request.context.size() + request.question.size());
  for (std::size_t i = 0; i < prompt_template.size();) {
    if (prompt_template.compare(i, 9, "{context}") == 0) {
      out += request.context;
      i += 9;
    } else if (prompt_template.compare(i, 10, "{question}") == 0) {
      out += request.question;
      i += 10;
    } else {
      out.push_back(prompt_template[i++]);
    }
  }
  return out;
}

GenerationBundle bundle_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("fixture line is not an object");
  GenerationBundle b;
  b.query.dataset_id = j.value("dataset_id", std::string{});
  if (j.contains("row_index") && !j["row_index"].is_null()) b.query.row_index = j["row_index"].get<std::size_t>();
  b.query.context = j.at("context").get<std::string>();
  b.query.question = j.at("question").get<std::string>();
  b.query.correct_answer = j.value("correct_answer", std::string{});
  b.a_o = j.at("a_o").get<std::string>();
  b.samples = j.at("samples").get<std::vector<std::string>>();
  if (j.contains("metadata")) b.metadata = j["metadata"];
  return b;
}

nlohmann::json bundle_to_json(const GenerationBundle& b) {
  nlohmann::json j;
  j["dataset_id"] = b.query.dataset_id;
  j["row_index"] = b.query.row_index ? nlohmann::json(*b.query.row_index) : nlohmann::json(nullptr);
  j["context"] = b.query.context;
  j["question"] = b.query.question;
  j["correct_answer"] = b.query.correct_answer;
  j["a_o"] = b.a_o;
  j["samples"] = b.samples;
  if (!b.metadata.empty()) j["metadata"] = b.metadata;
  return j;
}

FixtureGenerator::FixtureGenerator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open fixture file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<GenerationBundle> bundles;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      bundles.push_back(bundle_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      ++skipped_;
      spdlog::warn("{}:{}: skipping bad fixture line: {}", path.string(), line_no, e.what());
    }
  }
  const auto skipped = skipped_;
  *this = FixtureGenerator(std::move(bundles));
  skipped_ = skipped;
}

FixtureGenerator::FixtureGenerator(std::vector<GenerationBundle> bundles) : bundles_(std::move(bundles)) {
  for (std::size_t i = 0; i < bundles_.size(); ++i) {
    const auto& q = bundles_[i].query;
    if (q.row_index) by_ref_.try_emplace({q.dataset_id, *q.row_index}, i);
    by_question_.try_emplace(q.question, i);
  }
}

const GenerationBundle& FixtureGenerator::find(const GenerationRequest& request) const {
  if (request.row_index) {
    auto it = by_ref_.find({request.dataset_id, *request.row_index});
    if (it != by_ref_.end()) return bundles_[it->second];
  }
  auto it = by_question_.find(request.question);
  if (it != by_question_.end()) return bundles_[it->second];
  throw LookupError("no recorded generation for question \"" + request.question.substr(0, 60) + "\"");
}

std::string FixtureGenerator::generate(const GenerationRequest& request, std::size_t draw) {
  const auto& b = find(request);
  if (draw == 0) return b.a_o;
  if (draw > b.samples.size()) {
    throw LookupError("recorded generation has " + std::to_string(b.samples.size()) + " samples, draw " +
                      std::to_string(draw) + " requested");
  }
  return b.samples[draw - 1];
}

ChatCompletionGenerator::ChatCompletionGenerator(ChatGeneratorOptions options) : options_(std::move(options)) {
  if (options_.attempts < 1) options_.attempts = 1;
}

void ChatCompletionGenerator::throttle() {
  if (options_.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options_.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string ChatCompletionGenerator::generate(const GenerationRequest& request, std::size_t draw) {
  nlohmann::json body;
  body["model"] = options_.model;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", render_prompt(options_.prompt_template, request)}}});
  body["temperature"] = options_.sampling.temperature;
  body["top_k"] = options_.sampling.top_k;
  body["max_tokens"] = options_.sampling.max_tokens;
  if (options_.sampling.seed) body["seed"] = *options_.sampling.seed + draw;

  http::Headers headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);

  auto reply = http::with_retries(options_.attempts, options_.backoff, [&] {
    throttle();
    return http::post_json(options_.base_url, "/v1/chat/completions", body, headers, options_.timeout_seconds);
  });
  if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
    throw TransportError("chat completion reply has no choices");
  }
  const auto& message = reply["choices"][0].value("message", nlohmann::json::object());
  const auto& content = message.contains("content") ? message["content"] : nlohmann::json();
  return content.is_string() ? content.get<std::string>() : std::string{};
}

GenerationBundle generate_bundle(AnswerGenerator& generator, const GenerationRequest& request, std::size_t m,
                                 const SamplingConfig& sampling) {
  if (m == 0) throw ConfigError("self-check needs m >= 1 samples");
  auto stamp = [] { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); };
  GenerationBundle bundle;
  bundle.query = request;
  const std::string started = stamp();
  bundle.a_o = generator.generate(request, 0);
  bundle.samples.reserve(m);
  for (std::size_t l = 1; l <= m; ++l) bundle.samples.push_back(generator.generate(request, l));
  bundle.metadata = {{"model", generator.model_id()}, {"sampling", sampling.to_json()}, {"requests", m + 1},
                     {"started_at", started},
                     {"finished_at", stamp()}};
  return bundle;
}

}  // namespace ksprune
