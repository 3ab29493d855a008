#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ksprune/corpus.hpp"
#include "ksprune/similarity.hpp"
#include "ksprune/tfidf.hpp"

namespace ksprune {

/// A target row and its score against one query.
struct ScoredRow {
  std::uint32_t row = 0;
  double score = 0.0;

  friend bool operator==(const ScoredRow&, const ScoredRow&) = default;
};

/// Descending score, then ascending row. Shared by every ranked list.
inline bool ranks_before(const ScoredRow& a, const ScoredRow& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

/// Pre-processed representation of a query in both lexical channels.
struct QueryRep {
  std::vector<std::uint32_t> jaccard_terms;  // sorted ids of known content tokens
  std::size_t jaccard_size = 0;              // |content set| including unknown tokens
  SparseVector tfidf;
};

/// Inverted indexes over every dataset of a registry for the two lexical
/// channels, plus one global TF-IDF model fitted over all rows.
///
/// Top-K retrieval is exact: postings only generate candidates (rows sharing
/// at least one content token / weighted term), and every candidate is scored
/// in full. Rows scoring 0 are never returned.
class CorpusIndex {
 public:
  struct Options {
    FieldScope scope = FieldScope::kCQA;
    std::size_t workers = 1;
    std::shared_ptr<const StopwordList> stopwords;  // null: built-in list
    /// Reuse a model loaded from an index cache instead of refitting.
    std::optional<TfIdfModel> model;
  };

  CorpusIndex(const DatasetRegistry& registry, Options options);
  explicit CorpusIndex(const DatasetRegistry& registry) : CorpusIndex(registry, Options{}) {}

  const DatasetRegistry& registry() const { return *registry_; }
  const TfIdfModel& model() const { return model_; }
  const TextNormalizer& normalizer() const { return normalizer_; }
  FieldScope scope() const { return scope_; }

  QueryRep make_query(std::string_view text) const;
  /// The stored representation of an indexed row (no re-tokenization).
  QueryRep row_query(std::size_t dataset_pos, std::size_t row) const;

  /// Top-k rows of dataset `target_pos` for `query` under `metric`
  /// (jaccard or tfidf), ordered by ranks_before.
  std::vector<ScoredRow> topk(const QueryRep& query, std::size_t target_pos, Metric metric, std::size_t k) const;

  /// Every row of `target_pos` with a non-zero score, unsorted.
  std::vector<ScoredRow> score_all(const QueryRep& query, std::size_t target_pos, Metric metric) const;

  std::size_t global_doc(std::size_t dataset_pos, std::size_t row) const { return offsets_[dataset_pos] + row; }

  /// Content-token set (lemmatized, stopwords dropped) of an indexed row's
  /// indexed text.
  TokenSet row_content(std::size_t dataset_pos, std::size_t row) const;

 private:
  struct Posting {
    std::uint32_t row;
    double weight;
  };
  struct Shard {
    std::vector<std::vector<std::uint32_t>> jaccard_rows;       // row -> sorted term ids
    std::vector<std::vector<std::uint32_t>> jaccard_postings;   // term -> rows
    std::vector<std::vector<Posting>> tfidf_postings;           // term -> (row, weight)
  };

  const DatasetRegistry* registry_;
  FieldScope scope_;
  TextNormalizer normalizer_;
  TfIdfModel model_;
  std::vector<std::string> jaccard_terms_;  // sorted
  std::vector<std::size_t> offsets_;
  std::vector<Shard> shards_;
};

/// Public-facing wrapper: top-K hits of `query` against `target_id`, with refs.
std::vector<SimilarityHit> topk_cross(const CorpusIndex& index, const RowRef& source, std::string_view query,
                                      std::string_view target_id, Metric metric, std::size_t k);

}  // namespace ksprune
