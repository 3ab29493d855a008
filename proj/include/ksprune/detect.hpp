#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ksprune/embedding.hpp"
#include "ksprune/generator.hpp"
#include "ksprune/index.hpp"

namespace ksprune {

struct SelfCheckParams {
  std::size_t m = 5;
  double alpha3 = 0.2;
  Metric sim_metric = Metric::kEmbed;
  SamplingConfig sampling;

  void validate() const;
};

struct DetectParams {
  std::size_t k1 = 50;  // per-metric top-K from the nearest entry
  std::size_t kv = 10;  // high-value group size per dataset
  /// Intersect Set(A_o) rather than the difference set with the pool.
  bool eq5_literal = false;
  SelfCheckParams self_check;

  void validate() const;
  nlohmann::json to_json() const;
};

struct NearestEntry {
  std::size_t dataset_pos = 0;
  std::string dataset_id;
  std::size_t row = 0;
  double score = 0.0;
  bool no_signal = false;  // nothing scored above 0; first row by tie-break
};

/// Most similar indexed row (TF-IDF cosine of the CQ text against each row's
/// indexed text). Ties go to the earlier dataset, then the lower row.
NearestEntry nearest_cqa(const CorpusIndex& index, std::string_view cq_text);

struct PoolEvidence {
  std::string dataset_id;
  std::size_t row = 0;
  Metric metric = Metric::kJaccard;
  std::size_t rank = 0;
  bool in_hf = false;
  bool in_hv = false;
};

struct HsRow {
  std::string dataset_id;
  std::size_t row = 0;
  std::optional<std::size_t> jaccard_rank;
  std::optional<std::size_t> tfidf_rank;
  double max_score = 0.0;
  bool in_hf = false;
  bool in_hv = false;
};

/// Token pool of the high-similarity group of one nearest entry.
struct ShortcutPool {
  std::vector<HsRow> rows;
  std::map<std::string, std::vector<PoolEvidence>> tokens;

  bool contains(const std::string& token) const { return tokens.contains(token); }
};

/// For each dataset other than the nearest entry's: top-k1 rows by Jaccard
/// and by TF-IDF from the nearest entry's text. G_HF is the rows present in
/// both lists, G_HV the kv rows with the highest score in either list. The
/// pool holds the content tokens of context + answer of every G_HF/G_HV row.
ShortcutPool detection_hs_pool(const CorpusIndex& index, const NearestEntry& nearest, std::size_t k1, std::size_t kv);

/// Similarity used to compare A_o with each resample.
using AnswerSimilarity = std::function<double(const std::string&, const std::string&)>;

AnswerSimilarity make_answer_similarity(Metric metric, const CorpusIndex& index, EmbeddingProvider* provider);

struct SelfCheckResult {
  double score = 0.0;
  bool flagged = false;
  bool empty_generation = false;
  std::vector<double> similarities;
};

/// Mean of 1 - Sim(A_o, A_l) over the m samples; flagged when the mean
/// exceeds alpha3. An empty A_o is flagged with score 1.
SelfCheckResult self_check(const GenerationBundle& bundle, const SelfCheckParams& params, const AnswerSimilarity& sim);

enum class Classification { kKsHallucination, kOtherHallucination, kNotFlagged };

std::string_view classification_name(Classification c);
Classification parse_classification(std::string_view name);

struct DetectionVerdict {
  GenerationRequest query;
  NearestEntry nearest;
  SelfCheckResult self_check;
  TokenSet answer_tokens;
  TokenSet s_o;
  /// Shortcut tokens with the pool evidence that explains each.
  std::map<std::string, std::vector<PoolEvidence>> shortcut_tokens;
  std::vector<HsRow> hs_rows;
  bool eq5_literal = false;
  Classification classification = Classification::kNotFlagged;

  nlohmann::ordered_json to_json() const;
};

/// Runs the full gate chain for one generated bundle.
DetectionVerdict classify(const CorpusIndex& index, const GenerationBundle& bundle, const DetectParams& params,
                          const AnswerSimilarity& sim);

/// The record written instead of a verdict when generation failed.
nlohmann::ordered_json error_record(const GenerationRequest& query, std::string_view error);

}  // namespace ksprune
