#include "ksprune/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ksprune/errors.hpp"
#include "ksprune/parallel.hpp"

namespace ksprune {

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return dot;
}

double unit_cosine(const SparseVector& a, const SparseVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  return std::clamp(sparse_dot(a, b), 0.0, 1.0);
}

TfIdfModel TfIdfModel::fit(std::span<const TokenSeq> docs, std::vector<std::string> keys) {
  if (docs.empty()) throw Error("TF-IDF model needs at least one document");
  TfIdfModel model;
  model.n_docs_ = docs.size();

  std::map<std::string, std::uint32_t> df;
  std::vector<const std::string*> uniq;
  for (const auto& doc : docs) {
    uniq.clear();
    for (const auto& t : doc) uniq.push_back(&t);
    std::sort(uniq.begin(), uniq.end(), [](auto* x, auto* y) { return *x < *y; });
    uniq.erase(std::unique(uniq.begin(), uniq.end(), [](auto* x, auto* y) { return *x == *y; }), uniq.end());
    for (const auto* t : uniq) ++df[*t];
  }
  if (df.empty()) throw Error("TF-IDF model: every document is empty");

  model.terms_.reserve(df.size());
  model.df_.reserve(df.size());
  for (auto& [term, count] : df) {
    model.ids_.emplace(term, static_cast<TermId>(model.terms_.size()));
    model.terms_.push_back(term);
    model.df_.push_back(count);
  }
  model.compute_idf();
  model.attach_documents(docs, std::move(keys));
  return model;
}

TfIdfModel TfIdfModel::fit_texts(std::span<const std::string> texts, const TextNormalizer& norm,
                                 std::vector<std::string> keys, std::size_t workers) {
  std::vector<TokenSeq> docs(texts.size());
  parallel_for(texts.size(), workers, [&](std::size_t i) { docs[i] = norm.tokens(texts[i]); });
  return fit(docs, std::move(keys));
}

void TfIdfModel::compute_idf() {
  idf_.resize(df_.size());
  const double n = static_cast<double>(n_docs_);
  for (std::size_t i = 0; i < df_.size(); ++i) {
    idf_[i] = std::max(0.0, std::log(n / (1.0 + static_cast<double>(df_[i]))));
  }
}

std::int64_t TfIdfModel::term_id(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  return it == ids_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::size_t TfIdfModel::df(std::string_view term) const {
  const auto id = term_id(term);
  return id < 0 ? 0 : df_[static_cast<std::size_t>(id)];
}

double TfIdfModel::idf(std::string_view term) const {
  const auto id = term_id(term);
  return id < 0 ? 0.0 : idf_[static_cast<std::size_t>(id)];
}

std::size_t TfIdfModel::doc_index(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) throw LookupError("unknown document key \"" + std::string(key) + "\"");
  return it->second;
}

SparseVector TfIdfModel::vectorize(const TokenSeq& tokens) const {
  SparseVector vec;
  if (tokens.empty()) return vec;
  std::vector<TermId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = ids_.find(t);
    if (it != ids_.end()) ids.push_back(it->second);
  }
  std::sort(ids.begin(), ids.end());
  const double total = static_cast<double>(tokens.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    const double tf = static_cast<double>(j - i) / total;
    const double w = tf * idf_[ids[i]];
    if (w > 0.0) {
      vec.emplace_back(ids[i], w);
      norm2 += w * w;
    }
    i = j;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& [id, w] : vec) w *= inv;
  }
  return vec;
}

double TfIdfModel::cosine(std::size_t doc_a, std::size_t doc_b) const {
  return unit_cosine(doc_vector(doc_a), doc_vector(doc_b));
}

void TfIdfModel::attach_documents(std::span<const TokenSeq> docs, std::vector<std::string> keys) {
  if (!keys.empty() && keys.size() != docs.size()) throw ConfigError("TF-IDF keys and documents differ in count");
  docs_.clear();
  docs_.reserve(docs.size());
  for (const auto& d : docs) docs_.push_back(vectorize(d));
  key_index_.clear();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!key_index_.emplace(keys[i], i).second) throw ConfigError("duplicate TF-IDF document key \"" + keys[i] + "\"");
  }
}

nlohmann::json TfIdfModel::to_json() const {
  nlohmann::json j;
  j["n_docs"] = n_docs_;
  j["terms"] = terms_;
  j["df"] = df_;
  return j;
}

TfIdfModel TfIdfModel::from_json(const nlohmann::json& j) {
  TfIdfModel model;
  model.n_docs_ = j.at("n_docs").get<std::size_t>();
  model.terms_ = j.at("terms").get<std::vector<std::string>>();
  model.df_ = j.at("df").get<std::vector<std::uint32_t>>();
  if (model.terms_.size() != model.df_.size()) throw ConsistencyError("TF-IDF model: terms/df length mismatch");
  if (!std::is_sorted(model.terms_.begin(), model.terms_.end())) {
    throw ConsistencyError("TF-IDF model: vocabulary is not sorted");
  }
  for (std::size_t i = 0; i < model.terms_.size(); ++i) model.ids_.emplace(model.terms_[i], static_cast<TermId>(i));
  model.compute_idf();
  return model;
}

}  // namespace ksprune
