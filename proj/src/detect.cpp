#include "ksprune/detect.hpp"

#include <algorithm>
#include <iterator>
#include <set>

#include "ksprune/errors.hpp"

namespace ksprune {

void SelfCheckParams::validate() const {
  if (m < 1) throw ConfigError("m must be >= 1");
  if (!(alpha3 >= 0.0 && alpha3 <= 1.0)) throw ConfigError("alpha3 must lie in [0, 1]");
}

void DetectParams::validate() const {
  if (k1 < 1) throw ConfigError("k1 must be >= 1");
  if (kv < 1) throw ConfigError("kv must be >= 1");
  self_check.validate();
}

nlohmann::json DetectParams::to_json() const {
  return {{"k1", k1},
          {"kv", kv},
          {"eq5_literal", eq5_literal},
          {"m", self_check.m},
          {"alpha3", self_check.alpha3},
          {"sim_metric", metric_name(self_check.sim_metric)},
          {"sampling", self_check.sampling.to_json()}};
}

NearestEntry nearest_cqa(const CorpusIndex& index, std::string_view cq_text) {
  const auto& registry = index.registry();
  if (registry.total_rows() == 0) throw ConfigError("nearest-entry search needs a non-empty registry");
  const QueryRep q = index.make_query(cq_text);

  NearestEntry best;
  bool found = false;
  for (std::size_t d = 0; d < registry.dataset_count(); ++d) {
    for (const auto& hit : index.score_all(q, d, Metric::kTfIdf)) {
      // Strictly greater keeps the earlier dataset; within a dataset compare rows.
      const bool better = !found || hit.score > best.score ||
                          (hit.score == best.score && d == best.dataset_pos && hit.row < best.row);
      if (better) {
        best.dataset_pos = d;
        best.row = hit.row;
        best.score = hit.score;
        found = true;
      }
    }
  }
  if (!found) {
    for (std::size_t d = 0; d < registry.dataset_count(); ++d) {
      if (registry.dataset_at(d).size() > 0) {
        best.dataset_pos = d;
        break;
      }
    }
    best.row = 0;
    best.score = 0.0;
    best.no_signal = true;
  }
  best.dataset_id = registry.dataset_at(best.dataset_pos).info.id;
  return best;
}

ShortcutPool detection_hs_pool(const CorpusIndex& index, const NearestEntry& nearest, std::size_t k1, std::size_t kv) {
  if (k1 < 1 || kv < 1) throw ConfigError("k1 and kv must be >= 1");
  const auto& registry = index.registry();
  const QueryRep q = index.row_query(nearest.dataset_pos, nearest.row);
  const auto& norm = index.normalizer();

  ShortcutPool pool;
  for (std::size_t d = 0; d < registry.dataset_count(); ++d) {
    if (d == nearest.dataset_pos) continue;
    const auto jaccard = index.topk(q, d, Metric::kJaccard, k1);
    const auto tfidf = index.topk(q, d, Metric::kTfIdf, k1);

    std::map<std::uint32_t, HsRow> rows;
    const std::string& id = registry.dataset_at(d).info.id;
    for (std::size_t i = 0; i < jaccard.size(); ++i) {
      auto& r = rows[jaccard[i].row];
      r.dataset_id = id;
      r.row = jaccard[i].row;
      r.jaccard_rank = i + 1;
      r.max_score = std::max(r.max_score, jaccard[i].score);
    }
    for (std::size_t i = 0; i < tfidf.size(); ++i) {
      auto& r = rows[tfidf[i].row];
      r.dataset_id = id;
      r.row = tfidf[i].row;
      r.tfidf_rank = i + 1;
      r.max_score = std::max(r.max_score, tfidf[i].score);
    }
    std::vector<HsRow*> by_value;
    for (auto& [row, r] : rows) {
      r.in_hf = r.jaccard_rank && r.tfidf_rank;
      by_value.push_back(&r);
    }
    std::sort(by_value.begin(), by_value.end(), [](const HsRow* a, const HsRow* b) {
      if (a->max_score != b->max_score) return a->max_score > b->max_score;
      return a->row < b->row;
    });
    for (std::size_t i = 0; i < by_value.size() && i < kv; ++i) by_value[i]->in_hv = true;

    for (auto& [row, r] : rows) {
      if (!r.in_hf && !r.in_hv) continue;
      const CqaRecord& rec = registry.dataset_at(d).records[row];
      const TokenSet tokens = norm.content(rec.context + " " + rec.answer);
      for (const auto& t : tokens) {
        auto& evidence = pool.tokens[t];
        if (r.jaccard_rank) evidence.push_back({id, r.row, Metric::kJaccard, *r.jaccard_rank, r.in_hf, r.in_hv});
        if (r.tfidf_rank) evidence.push_back({id, r.row, Metric::kTfIdf, *r.tfidf_rank, r.in_hf, r.in_hv});
      }
      pool.rows.push_back(r);
    }
  }
  return pool;
}

AnswerSimilarity make_answer_similarity(Metric metric, const CorpusIndex& index, EmbeddingProvider* provider) {
  switch (metric) {
    case Metric::kJaccard:
      return [&index](const std::string& a, const std::string& b) {
        return jaccard_sim(index.normalizer().content(a), index.normalizer().content(b));
      };
    case Metric::kTfIdf:
      return [&index](const std::string& a, const std::string& b) {
        const auto& model = index.model();
        return unit_cosine(model.vectorize(index.normalizer().tokens(a)), model.vectorize(index.normalizer().tokens(b)));
      };
    case Metric::kEmbed:
      if (provider == nullptr) throw ConfigError("embedding similarity selected but no embedding backend configured");
      return [provider](const std::string& a, const std::string& b) { return embed_sim(*provider, a, b).score; };
  }
  throw ConfigError("unknown similarity metric");
}

SelfCheckResult self_check(const GenerationBundle& bundle, const SelfCheckParams& params, const AnswerSimilarity& sim) {
  params.validate();
  if (bundle.samples.size() != params.m) {
    throw ConfigError("self-check expects " + std::to_string(params.m) + " samples, bundle has " +
                      std::to_string(bundle.samples.size()));
  }
  SelfCheckResult result;
  if (collapse_whitespace(bundle.a_o).empty()) {
    result.score = 1.0;
    result.flagged = true;
    result.empty_generation = true;
    return result;
  }
  double total = 0.0;
  for (const auto& sample : bundle.samples) {
    const double s = std::clamp(sim(bundle.a_o, sample), 0.0, 1.0);
    result.similarities.push_back(s);
    total += 1.0 - s;
  }
  result.score = total / static_cast<double>(params.m);
  result.flagged = result.score > params.alpha3;
  return result;
}

std::string_view classification_name(Classification c) {
  switch (c) {
    case Classification::kKsHallucination: return "ks_hallucination";
    case Classification::kOtherHallucination: return "other_hallucination";
    case Classification::kNotFlagged: return "not_flagged";
  }
  return "unknown";
}

Classification parse_classification(std::string_view name) {
  if (name == "ks_hallucination") return Classification::kKsHallucination;
  if (name == "other_hallucination") return Classification::kOtherHallucination;
  if (name == "not_flagged") return Classification::kNotFlagged;
  throw std::invalid_argument("unknown classification \"" + std::string(name) + "\"");
}

DetectionVerdict classify(const CorpusIndex& index, const GenerationBundle& bundle, const DetectParams& params,
                          const AnswerSimilarity& sim) {
  params.validate();
  DetectionVerdict v;
  v.query = bundle.query;
  v.eq5_literal = params.eq5_literal;

  const std::string cq = query_text(bundle.query.context, bundle.query.question, "", FieldScope::kCQ);
  v.nearest = nearest_cqa(index, cq);
  const ShortcutPool pool = detection_hs_pool(index, v.nearest, params.k1, params.kv);
  v.hs_rows = pool.rows;
  v.self_check = self_check(bundle, params.self_check, sim);

  const auto& norm = index.normalizer();
  v.answer_tokens = norm.content(bundle.a_o);
  const TokenSet cq_tokens = norm.content(cq);
  std::set_difference(v.answer_tokens.begin(), v.answer_tokens.end(), cq_tokens.begin(), cq_tokens.end(),
                      std::inserter(v.s_o, v.s_o.end()));

  const TokenSet& probe = params.eq5_literal ? v.answer_tokens : v.s_o;
  for (const auto& t : probe) {
    auto it = pool.tokens.find(t);
    if (it != pool.tokens.end()) v.shortcut_tokens.emplace(t, it->second);
  }

  if (!v.self_check.flagged) {
    v.classification = Classification::kNotFlagged;
  } else if (!v.s_o.empty() && !v.shortcut_tokens.empty()) {
    v.classification = Classification::kKsHallucination;
  } else {
    v.classification = Classification::kOtherHallucination;
  }
  return v;
}

namespace {

nlohmann::ordered_json query_json(const GenerationRequest& q) {
  nlohmann::ordered_json j;
  j["dataset_id"] = q.dataset_id;
  j["row_index"] = q.row_index ? nlohmann::ordered_json(*q.row_index) : nlohmann::ordered_json(nullptr);
  j["question"] = q.question;
  return j;
}

}  // namespace

nlohmann::ordered_json DetectionVerdict::to_json() const {
  nlohmann::ordered_json j = query_json(query);
  j["classification"] = classification_name(classification);
  j["nearest"] = {{"dataset_id", nearest.dataset_id},
                  {"row_index", nearest.row},
                  {"score", nearest.score},
                  {"no_signal", nearest.no_signal}};
  j["self_check"] = {{"score", self_check.score},
                     {"flagged", self_check.flagged},
                     {"empty_generation", self_check.empty_generation},
                     {"similarities", self_check.similarities}};
  j["answer_tokens"] = answer_tokens;
  j["s_o"] = s_o;
  j["eq5_literal"] = eq5_literal;
  auto& tokens = j["shortcut_tokens"] = nlohmann::ordered_json::array();
  for (const auto& [token, evidence] : shortcut_tokens) {
    nlohmann::ordered_json tj;
    tj["token"] = token;
    tj["evidence"] = nlohmann::ordered_json::array();
    for (const auto& e : evidence) {
      tj["evidence"].push_back({{"dataset_id", e.dataset_id},
                                {"row_index", e.row},
                                {"metric", metric_name(e.metric)},
                                {"rank", e.rank},
                                {"in_hf", e.in_hf},
                                {"in_hv", e.in_hv}});
    }
    tokens.push_back(std::move(tj));
  }
  auto& rows = j["hs_rows"] = nlohmann::ordered_json::array();
  for (const auto& r : hs_rows) {
    nlohmann::ordered_json rj;
    rj["dataset_id"] = r.dataset_id;
    rj["row_index"] = r.row;
    rj["jaccard_rank"] = r.jaccard_rank ? nlohmann::ordered_json(*r.jaccard_rank) : nlohmann::ordered_json(nullptr);
    rj["tfidf_rank"] = r.tfidf_rank ? nlohmann::ordered_json(*r.tfidf_rank) : nlohmann::ordered_json(nullptr);
    rj["max_score"] = r.max_score;
    rj["in_hf"] = r.in_hf;
    rj["in_hv"] = r.in_hv;
    rows.push_back(std::move(rj));
  }
  return j;
}

nlohmann::ordered_json error_record(const GenerationRequest& query, std::string_view error) {
  nlohmann::ordered_json j = query_json(query);
  j["classification"] = nullptr;
  j["error"] = error;
  return j;
}

}  // namespace ksprune
