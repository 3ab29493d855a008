#include "ksprune/index.hpp"

#include <algorithm>
#include <unordered_map>

#include "ksprune/errors.hpp"
#include "ksprune/parallel.hpp"

namespace ksprune {

CorpusIndex::CorpusIndex(const DatasetRegistry& registry, Options options)
    : registry_(&registry), scope_(options.scope), normalizer_(options.stopwords) {
  const auto datasets = registry.datasets();
  offsets_.reserve(datasets.size() + 1);
  std::size_t total = 0;
  for (const auto& ds : datasets) {
    offsets_.push_back(total);
    total += ds.size();
  }
  offsets_.push_back(total);
  if (total == 0) throw ConfigError("cannot index an empty registry");

  std::vector<const CqaRecord*> records;
  records.reserve(total);
  for (const auto& ds : datasets) {
    for (const auto& rec : ds.records) records.push_back(&rec);
  }

  std::vector<TokenSeq> tokens(total);
  std::vector<TokenSet> content(total);
  parallel_for(total, options.workers, [&](std::size_t i) {
    tokens[i] = normalizer_.tokens(query_text(*records[i], scope_));
    content[i] = content_set(tokens[i], true, normalizer_.stopwords());
  });

  if (options.model) {
    if (options.model->n_docs() != total) {
      throw ConsistencyError("cached TF-IDF model covers " + std::to_string(options.model->n_docs()) +
                             " documents, registry has " + std::to_string(total));
    }
    model_ = std::move(*options.model);
    model_.attach_documents(tokens);
  } else {
    model_ = TfIdfModel::fit(tokens);
  }

  {
    std::vector<std::string> all;
    for (const auto& set : content) all.insert(all.end(), set.begin(), set.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    jaccard_terms_ = std::move(all);
  }
  std::unordered_map<std::string_view, std::uint32_t> jaccard_ids;
  jaccard_ids.reserve(jaccard_terms_.size());
  for (std::size_t i = 0; i < jaccard_terms_.size(); ++i) jaccard_ids.emplace(jaccard_terms_[i], static_cast<std::uint32_t>(i));

  shards_.resize(datasets.size());
  parallel_for(datasets.size(), options.workers, [&](std::size_t d) {
    Shard& shard = shards_[d];
    const std::size_t n = datasets[d].size();
    shard.jaccard_rows.resize(n);
    shard.jaccard_postings.assign(jaccard_terms_.size(), {});
    shard.tfidf_postings.assign(model_.vocabulary_size(), {});
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t g = offsets_[d] + r;
      auto& ids = shard.jaccard_rows[r];
      ids.reserve(content[g].size());
      for (const auto& t : content[g]) ids.push_back(jaccard_ids.at(t));
      std::sort(ids.begin(), ids.end());
      for (auto id : ids) shard.jaccard_postings[id].push_back(static_cast<std::uint32_t>(r));
      for (const auto& [term, w] : model_.doc_vector(g)) {
        shard.tfidf_postings[term].push_back({static_cast<std::uint32_t>(r), w});
      }
    }
  });
}

QueryRep CorpusIndex::make_query(std::string_view text) const {
  QueryRep q;
  const TokenSeq toks = normalizer_.tokens(text);
  const TokenSet set = content_set(toks, true, normalizer_.stopwords());
  q.jaccard_size = set.size();
  for (const auto& t : set) {
    auto it = std::lower_bound(jaccard_terms_.begin(), jaccard_terms_.end(), t);
    if (it != jaccard_terms_.end() && *it == t) {
      q.jaccard_terms.push_back(static_cast<std::uint32_t>(it - jaccard_terms_.begin()));
    }
  }
  q.tfidf = model_.vectorize(toks);
  return q;
}

QueryRep CorpusIndex::row_query(std::size_t dataset_pos, std::size_t row) const {
  QueryRep q;
  q.jaccard_terms = shards_.at(dataset_pos).jaccard_rows.at(row);
  q.jaccard_size = q.jaccard_terms.size();
  q.tfidf = model_.doc_vector(global_doc(dataset_pos, row));
  return q;
}

TokenSet CorpusIndex::row_content(std::size_t dataset_pos, std::size_t row) const {
  TokenSet out;
  for (auto id : shards_.at(dataset_pos).jaccard_rows.at(row)) out.insert(jaccard_terms_[id]);
  return out;
}

std::vector<ScoredRow> CorpusIndex::score_all(const QueryRep& query, std::size_t target_pos, Metric metric) const {
  const Shard& shard = shards_.at(target_pos);
  const std::size_t n = shard.jaccard_rows.size();
  std::vector<ScoredRow> out;
  std::vector<std::uint32_t> touched;

  if (metric == Metric::kJaccard) {
    if (query.jaccard_size == 0) return out;
    std::vector<std::uint32_t> common(n, 0);
    for (auto term : query.jaccard_terms) {
      for (auto row : shard.jaccard_postings[term]) {
        if (common[row]++ == 0) touched.push_back(row);
      }
    }
    out.reserve(touched.size());
    for (auto row : touched) {
      const std::size_t inter = common[row];
      const std::size_t uni = query.jaccard_size + shard.jaccard_rows[row].size() - inter;
      out.push_back({row, static_cast<double>(inter) / static_cast<double>(uni)});
    }
    return out;
  }
  if (metric == Metric::kTfIdf) {
    std::vector<double> acc(n, 0.0);
    std::vector<char> seen(n, 0);
    // Query terms are visited in ascending id order, which matches the
    // summation order of sparse_dot, so scores are bit-identical to a direct
    // vector comparison.
    for (const auto& [term, qw] : query.tfidf) {
      for (const auto& p : shard.tfidf_postings[term]) {
        if (!seen[p.row]) {
          seen[p.row] = 1;
          touched.push_back(p.row);
        }
        acc[p.row] += qw * p.weight;
      }
    }
    out.reserve(touched.size());
    for (auto row : touched) {
      const double s = std::clamp(acc[row], 0.0, 1.0);
      if (s > 0.0) out.push_back({row, s});
    }
    return out;
  }
  throw ConfigError("index supports only jaccard and tfidf retrieval");
}

std::vector<ScoredRow> CorpusIndex::topk(const QueryRep& query, std::size_t target_pos, Metric metric,
                                         std::size_t k) const {
  if (k == 0) throw ConfigError("top-K needs K >= 1");
  auto scored = score_all(query, target_pos, metric);
  if (scored.size() > k) {
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), ranks_before);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), ranks_before);
  }
  return scored;
}

std::vector<SimilarityHit> topk_cross(const CorpusIndex& index, const RowRef& source, std::string_view query,
                                      std::string_view target_id, Metric metric, std::size_t k) {
  const std::size_t target = index.registry().position_of(target_id);
  const auto rows = index.topk(index.make_query(query), target, metric, k);
  std::vector<SimilarityHit> hits;
  hits.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hits.push_back({source, RowRef{std::string(target_id), rows[i].row}, metric, rows[i].score, i + 1});
  }
  return hits;
}

}  // namespace ksprune
