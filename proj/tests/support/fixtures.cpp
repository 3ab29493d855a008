#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ksprune/hashing.hpp"
#include "ksprune/textnorm.hpp"

namespace kst {

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    path_ = fs::temp_directory_path() / ("ksprune-test-" + std::to_string(rng() % 1000000000ULL));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

void write_jsonl(const fs::path& p, const std::vector<Row>& rows) {
  std::string body;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["context"] = r.context;
    j["question"] = r.question;
    j["answer"] = r.answer;
    body += j.dump() + "\n";
  }
  write_text(p, body);
}

void write_manifest(const fs::path& p, const std::vector<ManifestEntry>& entries) {
  nlohmann::ordered_json j;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    j["datasets"].push_back(
        {{"id", e.id}, {"category", "test"}, {"path", e.file}, {"format", e.format}, {"protected", e.is_protected}});
  }
  write_text(p, j.dump(2));
}

ksprune::Dataset make_dataset(const std::string& id, const std::vector<Row>& rows, bool is_protected) {
  ksprune::Dataset ds;
  ds.info.id = id;
  ds.info.path = id + ".jsonl";
  ds.info.is_protected = is_protected;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ksprune::CqaRecord r;
    r.dataset_id = id;
    r.row_index = i;
    r.context = rows[i].context;
    r.question = rows[i].question;
    r.answer = rows[i].answer;
    ds.records.push_back(r);
    ds.raw_rows.push_back(nlohmann::json{{"context", r.context}, {"question", r.question}, {"answer", r.answer}}.dump());
  }
  return ds;
}

std::string pseudo_word(std::size_t i, const std::string& salt) {
  static const std::string cons = "bdfgklmnprtvz";
  static const std::string vows = "aiou";
  std::string w = salt;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syl = i % 52;
    i /= 52;
    w += cons[syl / 4];
    w += vows[syl % 4];
  }
  return w;
}

namespace {

const std::vector<std::string>& small_vocab() {
  static const std::vector<std::string> v = {
      "the",    "a",       "of",      "and",      "is",       "cell",    "cells",   "organ",   "organs",
      "liver",  "gland",   "glands",  "adrenal",  "running",  "runs",    "ran",     "produce", "produced",
      "energy", "energies", "plant",  "plants",   "leaf",     "leaves",  "water",   "study",   "studies",
      "heart",  "blood",   "pumps",   "pumped",   "tissue",   "tissues", "river",   "rivers",  "flows",
      "rock",   "rocks",   "layer",   "layers",   "heat",     "heated",  "light",   "lights",  "fast",
      "atom",   "atoms",   "bond",    "bonds",    "acid",     "acids",   "mass",    "masses",  "it's",
      "Cell's", "Ørsted",  "naïve",   "x",        "42",       "co-op"};
  return v;
}

std::string random_text(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  const auto& v = small_vocab();
  std::uniform_int_distribution<std::size_t> len(lo, hi), pick(0, v.size() - 1);
  const std::size_t n = len(rng);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += (rng() % 7 == 0) ? ", " : " ";
    out += v[pick(rng)];
  }
  return out;
}

}  // namespace

ksprune::DatasetRegistry random_registry(std::mt19937_64& rng, std::size_t datasets, std::size_t max_rows) {
  std::vector<ksprune::Dataset> out;
  const std::size_t per = std::max<std::size_t>(1, max_rows / datasets);
  std::uniform_int_distribution<std::size_t> rows(1, per);
  for (std::size_t d = 0; d < datasets; ++d) {
    std::vector<Row> rs(rows(rng));
    for (auto& r : rs) {
      r.context = random_text(rng, 0, 10);
      r.question = random_text(rng, 1, 5);
      r.answer = random_text(rng, 0, 3);
    }
    out.push_back(make_dataset("d" + std::to_string(d), rs));
  }
  return ksprune::DatasetRegistry(std::move(out));
}

BruteForce::BruteForce(const ksprune::DatasetRegistry& registry) : registry_(registry) {
  std::vector<std::vector<std::vector<std::string>>> toks;
  std::map<std::string, std::size_t> df;
  std::size_t n = 0;
  for (const auto& ds : registry.datasets()) {
    auto& dt = toks.emplace_back();
    auto& ss = sets_.emplace_back();
    for (const auto& rec : ds.records) {
      const std::string text = ksprune::query_text(rec, ksprune::FieldScope::kCQA);
      dt.push_back(norm_.tokens(text));
      ss.push_back(norm_.content(text));
      for (const auto& t : std::set<std::string>(dt.back().begin(), dt.back().end())) ++df[t];
      ++n;
    }
  }
  for (const auto& [t, c] : df) idf_[t] = std::max(0.0, std::log(double(n) / (1.0 + double(c))));
  for (const auto& dt : toks) {
    auto& vs = vecs_.emplace_back();
    for (const auto& t : dt) vs.push_back(vectorize(t));
  }
}

BruteForce::Vec BruteForce::vectorize(const std::vector<std::string>& tokens) const {
  Vec v;
  for (const auto& t : tokens) {
    auto it = idf_.find(t);
    if (it == idf_.end() || it->second == 0.0) continue;
    v[t] += it->second / double(tokens.size());
  }
  double n2 = 0.0;
  for (const auto& [t, w] : v) n2 += w * w;
  if (n2 == 0.0) return {};
  for (auto& [t, w] : v) w /= std::sqrt(n2);
  return v;
}

OracleScores BruteForce::score(const std::string& query, std::size_t target) const {
  OracleScores out;
  const auto qset = norm_.content(query);
  const auto qvec = vectorize(norm_.tokens(query));
  for (std::size_t r = 0; r < sets_[target].size(); ++r) {
    const auto& s = sets_[target][r];
    std::set<std::string> inter, uni;
    std::set_intersection(qset.begin(), qset.end(), s.begin(), s.end(), std::inserter(inter, inter.end()));
    std::set_union(qset.begin(), qset.end(), s.begin(), s.end(), std::inserter(uni, uni.end()));
    out.jaccard.push_back(uni.empty() ? 0.0 : double(inter.size()) / double(uni.size()));
    double dot = 0.0;
    for (const auto& [t, w] : qvec) {
      auto it = vecs_[target][r].find(t);
      if (it != vecs_[target][r].end()) dot += w * it->second;
    }
    out.tfidf.push_back(std::clamp(dot, 0.0, 1.0));
  }
  return out;
}

std::vector<ksprune::ScoredRow> oracle_rank(const std::vector<double>& scores, std::size_t k) {
  std::vector<ksprune::ScoredRow> rows;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > 0.0) rows.push_back({static_cast<std::uint32_t>(i), scores[i]});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.row < b.row;
  });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

std::string compare_rankings(const std::vector<ksprune::ScoredRow>& got, const std::vector<ksprune::ScoredRow>& want,
                             const std::vector<double>& oracle_scores, double tol) {
  std::ostringstream err;
  if (got.size() != want.size()) {
    err << "length " << got.size() << " vs oracle " << want.size();
    return err.str();
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double own = oracle_scores.at(got[i].row);
    if (std::abs(got[i].score - own) > tol) {
      err << "row " << got[i].row << " score " << got[i].score << " vs oracle " << own;
      return err.str();
    }
    if (got[i].row != want[i].row && std::abs(own - want[i].score) > tol) {
      err << "rank " << i + 1 << ": row " << got[i].row << " vs oracle row " << want[i].row;
      return err.str();
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

PlantedPrune write_planted_prune(const fs::path& dir, std::uint64_t seed, const std::vector<std::size_t>& sizes,
                                 double k2_ratio) {
  std::mt19937_64 rng(seed);
  static const std::vector<std::string> salts = {"ka", "ti", "mo", "ru", "za", "pi"};
  PlantedPrune out;
  std::vector<std::string> planted_vocab, common_vocab;
  for (std::size_t i = 0; i < 40; ++i) planted_vocab.push_back(pseudo_word(i * 7 + 3, "vu"));
  for (std::size_t i = 0; i < 2000; ++i) common_vocab.push_back(pseudo_word(i, "lo"));

  auto pick_words = [&](const std::vector<std::string>& vocab, std::size_t n) {
    std::vector<std::string> w = vocab;
    std::shuffle(w.begin(), w.end(), rng);
    w.resize(n);
    std::string s;
    for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
    return s;
  };

  std::vector<ManifestEntry> entries;
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    const std::string id = "set_" + salts[d % salts.size()] + std::to_string(d);
    const std::size_t n = sizes[d];
    const auto k2 = static_cast<std::size_t>(std::ceil(k2_ratio * double(n) - 1e-9));
    std::vector<std::string> domain;
    for (std::size_t i = 0; i < 300; ++i) domain.push_back(pseudo_word(i, salts[d % salts.size()]));

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::set<std::size_t> planted(idx.begin(), idx.begin() + k2);

    std::vector<Row> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (planted.contains(i)) {
        rows[i] = {pick_words(planted_vocab, 20), pick_words(planted_vocab, 4), pick_words(planted_vocab, 1)};
      } else {
        rows[i] = {pick_words(domain, 10), pick_words(domain, 4), pick_words(domain, 1)};
        if (rng() % 2 == 0) rows[i].context += " " + common_vocab[rng() % common_vocab.size()];
      }
    }
    write_jsonl(dir / (id + ".jsonl"), rows);
    entries.push_back({id, id + ".jsonl"});
    out.ids.push_back(id);
    out.sizes.push_back(n);
    out.planted.push_back(planted);
  }
  out.manifest = dir / "manifest.json";
  write_manifest(out.manifest, entries);
  return out;
}

// ---------------------------------------------------------------------------

ksprune::VectorTable orthogonal_vectors(const std::set<std::string>& texts) {
  ksprune::VectorTable t;
  t.dim = texts.size();
  std::size_t i = 0;
  for (const auto& text : texts) {
    ksprune::Embedding v(t.dim, 0.0f);
    v[i++] = 1.0f;
    const auto h = ksprune::content_hash(text);
    t.vectors[h] = std::move(v);
    t.texts[h] = text;
  }
  return t;
}

PlantedDetect write_planted_detect(const fs::path& dir, std::size_t groups_per_kind) {
  const std::vector<CaseKind> kinds = {CaseKind::kPlanted, CaseKind::kConsistent, CaseKind::kNovel, CaseKind::kCopied,
                                       CaseKind::kSeparating};
  PlantedDetect out;
  std::vector<Row> ref, shortcut, filler;
  std::set<std::string> texts;
  std::size_t word = 0;
  auto fresh = [&](const std::string& salt) { return pseudo_word(word++, salt); };

  std::size_t q = 0;
  for (std::size_t g = 0; g < groups_per_kind; ++g) {
    for (CaseKind kind : kinds) {
      std::vector<std::string> topic;
      for (int i = 0; i < 14; ++i) topic.push_back(fresh("ta"));
      std::string context, question;
      for (int i = 0; i < 10; ++i) context += (i ? " " : "") + topic[i];
      for (int i = 10; i < 14; ++i) question += (i > 10 ? " " : "") + topic[i];
      const std::string answer = topic[0];
      const std::string planted = fresh("zy");
      ref.push_back({context, question, answer});
      shortcut.push_back({context + " " + planted, question, planted});
      filler.push_back({fresh("fe") + " " + fresh("fe") + " " + fresh("fe"), fresh("fe"), fresh("fe")});

      DetectCase c;
      c.kind = kind;
      c.bundle.query = {"queries", q++, context, question, answer};
      auto inconsistent = [&] {
        for (int s = 0; s < 5; ++s) c.bundle.samples.push_back(fresh("se"));
      };
      switch (kind) {
        case CaseKind::kPlanted:
          c.bundle.a_o = planted;
          c.planted_token = planted;
          inconsistent();
          break;
        case CaseKind::kConsistent:
          c.bundle.a_o = answer;
          c.bundle.samples.assign(5, answer);
          break;
        case CaseKind::kNovel:
          c.bundle.a_o = fresh("no");
          inconsistent();
          break;
        case CaseKind::kCopied:
          c.bundle.a_o = topic[3];
          inconsistent();
          break;
        case CaseKind::kSeparating:
          c.bundle.a_o = topic[4] + " " + fresh("no");
          inconsistent();
          break;
      }
      texts.insert(c.bundle.a_o);
      texts.insert(c.bundle.samples.begin(), c.bundle.samples.end());
      out.cases.push_back(std::move(c));
    }
  }
  write_jsonl(dir / "reference.jsonl", ref);
  write_jsonl(dir / "shortcut.jsonl", shortcut);
  write_jsonl(dir / "filler.jsonl", filler);
  out.manifest = dir / "manifest.json";
  write_manifest(out.manifest, {{"reference", "reference.jsonl"}, {"shortcut", "shortcut.jsonl"}, {"filler", "filler.jsonl"}});

  std::string body;
  for (const auto& c : out.cases) body += ksprune::bundle_to_json(c.bundle).dump() + "\n";
  out.fixtures = dir / "fixtures.jsonl";
  write_text(out.fixtures, body);

  out.vectors = dir / "vectors.ksev";
  ksprune::write_vector_file(out.vectors, orthogonal_vectors(texts));
  return out;
}

}  // namespace kst
