#include "ksprune/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "ksprune/detect.hpp"
#include "ksprune/errors.hpp"
#include "ksprune/hashing.hpp"
#include "ksprune/parallel.hpp"
#include "ksprune/tfidf.hpp"

namespace ksprune {

std::string GenerationRow::key() const {
  if (row_index) return dataset_id + "#" + std::to_string(*row_index);
  return "q:" + hex_digest(collapse_whitespace(question));
}

GenerationFile read_generation_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open generation file " + path.string());
  GenerationFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (collapse_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GenerationRow row;
      row.dataset_id = j.value("dataset_id", "");
      if (j.contains("row_index") && !j["row_index"].is_null()) row.row_index = j["row_index"].get<std::size_t>();
      row.question = j.value("question", "");
      row.correct_answer = j.at("correct_answer").get<std::string>();
      const auto& gen = j.at("generated_answer");
      row.generated_answer = gen.is_null() ? "" : gen.get<std::string>();
      out.rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      spdlog::warn("{}:{}: skipping malformed generation row ({})", path.string(), line_no, e.what());
      ++out.malformed;
    }
  }
  return out;
}

std::optional<double> EvalRow::score(Metric metric) const {
  switch (metric) {
    case Metric::kJaccard: return jaccard;
    case Metric::kTfIdf: return tfidf;
    case Metric::kEmbed: return embed;
  }
  return std::nullopt;
}

std::vector<EvalRow> score_generations(const std::vector<GenerationRow>& rows, EmbeddingProvider* provider,
                                       const TextNormalizer& norm, std::size_t workers) {
  std::vector<std::string> answers;
  answers.reserve(rows.size() * 2);
  for (const auto& r : rows) {
    answers.push_back(r.correct_answer);
    answers.push_back(r.generated_answer);
  }
  const TfIdfModel model = TfIdfModel::fit_texts(answers, norm, {}, workers);

  std::vector<EvalRow> out(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    EvalRow& e = out[i];
    e.source = rows[i];
    if (collapse_whitespace(rows[i].generated_answer).empty()) return;
    e.jaccard = jaccard_sim(norm.content(rows[i].correct_answer), norm.content(rows[i].generated_answer));
    e.tfidf = unit_cosine(model.doc_vector(2 * i), model.doc_vector(2 * i + 1));
  });

  if (provider != nullptr) {
    std::set<std::string> unique;
    for (const auto& r : rows) {
      if (collapse_whitespace(r.generated_answer).empty()) continue;
      unique.insert(r.correct_answer);
      unique.insert(r.generated_answer);
    }
    const std::vector<std::string> texts(unique.begin(), unique.end());
    const auto vectors = provider->embed(texts);
    if (vectors.size() != texts.size()) throw ConsistencyError("embedding provider returned a short batch");
    auto lookup = [&](const std::string& t) -> const Embedding& {
      return vectors[std::lower_bound(texts.begin(), texts.end(), t) - texts.begin()];
    };
    for (auto& e : out) {
      if (collapse_whitespace(e.source.generated_answer).empty()) {
        e.embed = 0.0;
        continue;
      }
      e.embed = std::clamp(raw_cosine(lookup(e.source.correct_answer), lookup(e.source.generated_answer)), 0.0, 1.0);
    }
  }
  return out;
}

std::map<Metric, CoarseMetric> coarse_metrics(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw ConfigError("coarse metrics need at least one row");
  std::map<Metric, CoarseMetric> out;
  for (Metric m : kEvalMetrics) {
    if (!rows.front().score(m)) continue;
    CoarseMetric c;
    double sum = 0.0;
    for (const auto& r : rows) {
      const double s = r.score(m).value_or(0.0);
      sum += s;
      if (s > 0.0 && !collapse_whitespace(r.source.generated_answer).empty()) ++c.count;
    }
    c.mean = sum / static_cast<double>(rows.size());
    out[m] = c;
  }
  return out;
}

std::string format_cell(const CoarseMetric& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu / %.5f", m.count, m.mean);
  return buf;
}

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kMore: return "more";
    case Label::kLess: return "less";
    case Label::kEqual: return "equal";
  }
  return "?";
}

PairedLabels label_against_baseline(const std::vector<EvalRow>& baseline, const std::vector<EvalRow>& variant) {
  std::map<std::string, const EvalRow*> by_key;
  for (const auto& r : variant) {
    if (!by_key.emplace(r.source.key(), &r).second) {
      throw ConfigError("variant file repeats query " + r.source.key());
    }
  }
  std::set<std::string> seen;
  for (const auto& r : baseline) {
    if (!seen.insert(r.source.key()).second) throw ConfigError("baseline file repeats query " + r.source.key());
    if (!by_key.contains(r.source.key())) {
      throw ConfigError("query " + r.source.key() + " is missing from the variant file");
    }
  }
  if (seen.size() != by_key.size()) throw ConfigError("variant file has queries absent from the baseline");

  PairedLabels out;
  for (const auto& b : baseline) {
    out.keys.push_back(b.source.key());
    const EvalRow& v = *by_key.at(b.source.key());
    for (Metric m : kEvalMetrics) {
      const auto bs = b.score(m);
      const auto vs = v.score(m);
      if (!bs || !vs) continue;
      Label l = *vs > *bs ? Label::kMore : (*vs < *bs ? Label::kLess : Label::kEqual);
      out.labels[m].push_back(l);
      auto& h = out.histogram[m];
      (l == Label::kMore ? h.more : l == Label::kLess ? h.less : h.equal)++;
    }
  }
  return out;
}

KsCounts count_ks_lines(std::istream& in) {
  KsCounts c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (collapse_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& cls = j.at("classification");
      if (cls.is_null()) {
        ++c.errors;
        continue;
      }
      switch (parse_classification(cls.get<std::string>())) {
        case Classification::kKsHallucination: ++c.ks; break;
        case Classification::kOtherHallucination: ++c.other; break;
        case Classification::kNotFlagged: ++c.not_flagged; break;
      }
    } catch (const std::exception& e) {
      spdlog::warn("verdict line {}: {}", line_no, e.what());
      ++c.errors;
    }
  }
  return c;
}

KsCounts count_ks(const std::filesystem::path& verdict_file) {
  std::ifstream in(verdict_file, std::ios::binary);
  if (!in) throw IoError("cannot open verdict file " + verdict_file.string());
  return count_ks_lines(in);
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["total_rows"] = total_rows;
  j["malformed_rows"] = malformed_rows;
  auto& metrics = j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [m, c] : coarse) {
    metrics[std::string(metric_name(m))] = {{"count", c.count}, {"mean", c.mean}, {"cell", format_cell(c)}};
  }
  if (labels) {
    auto& h = j["labels"] = nlohmann::ordered_json::object();
    for (const auto& [m, hist] : labels->histogram) {
      h[std::string(metric_name(m))] = {{"more", hist.more}, {"less", hist.less}, {"equal", hist.equal}};
    }
  }
  if (ks) {
    j["ks"] = {{"ks_hallucination", ks->ks},
               {"other_hallucination", ks->other},
               {"not_flagged", ks->not_flagged},
               {"errors", ks->errors}};
  }
  return j;
}

void write_scores_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "dataset_id,row_index,question,jaccard,tfidf,embed\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << csv::join_row({r.source.dataset_id, r.source.row_index ? std::to_string(*r.source.row_index) : "",
                          r.source.question, num(r.jaccard), num(r.tfidf), r.embed ? num(*r.embed) : ""})
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ksprune
