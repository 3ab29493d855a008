#include "ksprune/similarity.hpp"

#include <algorithm>

#include "ksprune/errors.hpp"

namespace ksprune {

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kJaccard: return "jaccard";
    case Metric::kTfIdf: return "tfidf";
    case Metric::kEmbed: return "embed";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "jaccard") return Metric::kJaccard;
  if (name == "tfidf") return Metric::kTfIdf;
  if (name == "embed") return Metric::kEmbed;
  throw ConfigError("unknown similarity metric \"" + std::string(name) + "\" (expected jaccard, tfidf or embed)");
}

double jaccard_sim(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string query_text(std::string_view context, std::string_view question, std::string_view answer,
                       FieldScope scope) {
  std::string joined;
  auto add = [&](std::string_view part) {
    std::string collapsed = collapse_whitespace(part);
    if (collapsed.empty()) return;
    if (!joined.empty()) joined.push_back(' ');
    joined += collapsed;
  };
  if (scope == FieldScope::kA) {
    add(answer);
    return joined;
  }
  add(context);
  add(question);
  if (scope == FieldScope::kCQA) add(answer);
  return joined;
}

std::string query_text(const CqaRecord& record, FieldScope scope) {
  return query_text(record.context, record.question, record.answer, scope);
}

}  // namespace ksprune
