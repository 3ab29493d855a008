#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "ksprune/corpus.hpp"
#include "ksprune/textnorm.hpp"

namespace ksprune {

enum class Metric { kJaccard, kTfIdf, kEmbed };

std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);

/// One entry of a top-K cross-dataset list. `rank` is 1-based.
struct SimilarityHit {
  RowRef source;
  RowRef target;
  Metric metric = Metric::kJaccard;
  double score = 0.0;
  std::size_t rank = 0;
};

/// |A ∩ B| / |A ∪ B|; two empty sets score 0.
double jaccard_sim(const TokenSet& a, const TokenSet& b);

/// Which record fields feed a similarity query.
enum class FieldScope { kCQ, kCQA, kA };

/// Joins the selected fields with single spaces after collapsing every
/// whitespace run; empty fields contribute nothing.
std::string query_text(const CqaRecord& record, FieldScope scope);
std::string query_text(std::string_view context, std::string_view question, std::string_view answer,
                       FieldScope scope);

/// Collapses whitespace runs to one space and trims both ends.
std::string collapse_whitespace(std::string_view text);

}  // namespace ksprune
