#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksprune/embedding.hpp"
#include "ksprune/similarity.hpp"
#include "ksprune/textnorm.hpp"

namespace ksprune {

inline constexpr std::array<Metric, 3> kEvalMetrics = {Metric::kJaccard, Metric::kTfIdf, Metric::kEmbed};

struct GenerationRow {
  std::string dataset_id;
  std::optional<std::size_t> row_index;
  std::string question;
  std::string correct_answer;
  std::string generated_answer;

  /// (dataset_id, row_index) when a row index is present, else a hash of the
  /// question text.
  std::string key() const;
};

struct GenerationFile {
  std::vector<GenerationRow> rows;
  std::size_t malformed = 0;
};

/// JSONL: {"dataset_id", "row_index", "question", "correct_answer", "generated_answer"}.
/// Malformed lines are counted and skipped.
GenerationFile read_generation_file(const std::filesystem::path& path);

struct EvalRow {
  GenerationRow source;
  double jaccard = 0.0;
  double tfidf = 0.0;
  std::optional<double> embed;  // absent when embeddings are disabled

  std::optional<double> score(Metric metric) const;
};

/// Scores every row's generated answer against its correct answer. The TF-IDF
/// model is fitted on the answers of this file only. `provider` may be null
/// to skip the embedding column.
std::vector<EvalRow> score_generations(const std::vector<GenerationRow>& rows, EmbeddingProvider* provider,
                                       const TextNormalizer& norm = TextNormalizer(), std::size_t workers = 1);

struct CoarseMetric {
  std::size_t count = 0;  // rows with a non-empty generation and score > 0
  double mean = 0.0;      // over all rows
};

/// One entry per metric present in the rows. Throws ConfigError on no rows.
std::map<Metric, CoarseMetric> coarse_metrics(const std::vector<EvalRow>& rows);

/// "count / mean" with five decimals.
std::string format_cell(const CoarseMetric& m);

enum class Label { kMore, kLess, kEqual };

std::string_view label_name(Label label);

struct LabelHistogram {
  std::size_t more = 0;
  std::size_t less = 0;
  std::size_t equal = 0;
};

struct PairedLabels {
  std::vector<std::string> keys;                  // baseline order
  std::map<Metric, std::vector<Label>> labels;    // aligned with keys
  std::map<Metric, LabelHistogram> histogram;
};

/// Paired per-metric comparison; throws ConfigError unless both sides cover
/// exactly the same query keys.
PairedLabels label_against_baseline(const std::vector<EvalRow>& baseline, const std::vector<EvalRow>& variant);

struct KsCounts {
  std::size_t ks = 0;
  std::size_t other = 0;
  std::size_t not_flagged = 0;
  std::size_t errors = 0;  // error records and malformed lines, outside the partition

  std::size_t total() const { return ks + other + not_flagged; }
};

KsCounts count_ks(const std::filesystem::path& verdict_file);
KsCounts count_ks_lines(std::istream& in);

struct EvalReport {
  std::size_t total_rows = 0;
  std::size_t malformed_rows = 0;
  std::map<Metric, CoarseMetric> coarse;
  std::optional<PairedLabels> labels;
  std::optional<KsCounts> ks;

  nlohmann::ordered_json to_json() const;
};

/// Per-row CSV: dataset_id,row_index,question,jaccard,tfidf,embed.
void write_scores_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

}  // namespace ksprune
