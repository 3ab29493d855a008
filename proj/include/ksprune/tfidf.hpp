#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ksprune/textnorm.hpp"

namespace ksprune {

using TermId = std::uint32_t;

/// (term id, weight) pairs sorted by term id; zero weights are not stored.
using SparseVector = std::vector<std::pair<TermId, double>>;

/// Dot product of two sorted sparse vectors.
double sparse_dot(const SparseVector& a, const SparseVector& b);

/// Cosine of two unit (or zero) vectors, clamped to [0, 1]; zero vectors give 0.
double unit_cosine(const SparseVector& a, const SparseVector& b);

/// TF-IDF model over a fixed document collection.
///
/// Weights are TF(t,d) * IDF(t) with TF(t,d) = count(t,d) / |d| and
/// IDF(t) = max(0, log(N / (1 + DF(t)))). Each document vector is scaled to
/// unit L2 norm unless every weight is zero. Term ids follow lexicographic
/// order of the vocabulary.
class TfIdfModel {
 public:
  TfIdfModel() = default;

  /// Fits on pre-tokenized documents. Throws Error if every document is empty.
  static TfIdfModel fit(std::span<const TokenSeq> docs, std::vector<std::string> keys = {});
  /// Tokenizes (lemmatized, stopwords kept) then fits.
  static TfIdfModel fit_texts(std::span<const std::string> texts, const TextNormalizer& norm,
                              std::vector<std::string> keys = {}, std::size_t workers = 1);

  std::size_t n_docs() const { return n_docs_; }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

  /// Term id, or -1 if the term is not in the vocabulary.
  std::int64_t term_id(std::string_view term) const;
  std::size_t df(std::string_view term) const;
  double idf(std::string_view term) const;
  double idf(TermId id) const { return idf_[id]; }

  const SparseVector& doc_vector(std::size_t doc) const { return docs_.at(doc); }
  std::size_t doc_index(std::string_view key) const;

  /// Vectorizes arbitrary tokens with this model's IDF; unseen terms get weight 0.
  SparseVector vectorize(const TokenSeq& tokens) const;

  double cosine(std::size_t doc_a, std::size_t doc_b) const;
  double cosine(const SparseVector& a, const SparseVector& b) const { return unit_cosine(a, b); }

  /// Vocabulary, DF and N. Document vectors are rebuilt from the corpus.
  nlohmann::json to_json() const;
  static TfIdfModel from_json(const nlohmann::json& j);
  /// Recomputes document vectors for `docs` against a model loaded from JSON.
  void attach_documents(std::span<const TokenSeq> docs, std::vector<std::string> keys = {});

 private:
  void compute_idf();

  std::size_t n_docs_ = 0;
  std::vector<std::string> terms_;            // sorted
  std::unordered_map<std::string, TermId> ids_;
  std::vector<std::uint32_t> df_;
  std::vector<double> idf_;
  std::vector<SparseVector> docs_;
  std::unordered_map<std::string, std::size_t> key_index_;
};

}  // namespace ksprune
