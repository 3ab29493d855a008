#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ksprune/corpus.hpp"
#include "ksprune/embedding.hpp"
#include "ksprune/generator.hpp"
#include "ksprune/index.hpp"
#include "ksprune/similarity.hpp"

namespace kst {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_text(const fs::path& p);
void write_text(const fs::path& p, const std::string& content);

struct Row {
  std::string context, question, answer;
};

void write_jsonl(const fs::path& p, const std::vector<Row>& rows);

struct ManifestEntry {
  std::string id;
  std::string file;  // relative to the manifest
  bool is_protected = false;
  std::string format = "jsonl";
};
void write_manifest(const fs::path& p, const std::vector<ManifestEntry>& entries);

/// In-memory dataset (no file behind it).
ksprune::Dataset make_dataset(const std::string& id, const std::vector<Row>& rows, bool is_protected = false);

/// Letters-only word that is never a stopword and is left alone by the
/// lemmatizer (ends in a vowel other than 'e').
std::string pseudo_word(std::size_t i, const std::string& salt = "");

// ---------------------------------------------------------------------------
// Random small corpora over a tiny English vocabulary, to make ties and
// inflections common.
ksprune::DatasetRegistry random_registry(std::mt19937_64& rng, std::size_t datasets, std::size_t max_rows);

/// Score of every row of `target` against `query` computed from scratch:
/// std::set Jaccard over content tokens and a map-based TF-IDF fitted over
/// every row of the registry.
struct OracleScores {
  std::vector<double> jaccard;
  std::vector<double> tfidf;
};

class BruteForce {
 public:
  explicit BruteForce(const ksprune::DatasetRegistry& registry);
  OracleScores score(const std::string& query, std::size_t target) const;

 private:
  using Vec = std::map<std::string, double>;
  Vec vectorize(const std::vector<std::string>& tokens) const;

  const ksprune::DatasetRegistry& registry_;
  ksprune::TextNormalizer norm_;
  std::map<std::string, double> idf_;
  std::vector<std::vector<Vec>> vecs_;
  std::vector<std::vector<std::set<std::string>>> sets_;
};

/// Rows with score > 0 ranked by (score desc, row asc), truncated to k.
std::vector<ksprune::ScoredRow> oracle_rank(const std::vector<double>& scores, std::size_t k);

/// Empty when equal; otherwise a description of the first difference.
/// Positions may differ only inside groups whose scores agree within tol.
std::string compare_rankings(const std::vector<ksprune::ScoredRow>& got, const std::vector<ksprune::ScoredRow>& want,
                             const std::vector<double>& oracle_scores, double tol);

// ---------------------------------------------------------------------------
// Pruning fixture: four datasets with disjoint vocabularies and exactly
// ceil(0.006 N) planted rows each that share one vocabulary across datasets.
struct PlantedPrune {
  fs::path manifest;
  std::vector<std::string> ids;
  std::vector<std::size_t> sizes;
  std::vector<std::set<std::size_t>> planted;
};

PlantedPrune write_planted_prune(const fs::path& dir, std::uint64_t seed,
                                 const std::vector<std::size_t>& sizes = {500, 800, 1000, 1200},
                                 double k2_ratio = 0.006);

// ---------------------------------------------------------------------------
// Detection fixture: a reference dataset, a shortcut dataset whose rows repeat
// reference rows with one extra planted token, and a filler dataset.
enum class CaseKind { kPlanted, kConsistent, kNovel, kCopied, kSeparating };

struct DetectCase {
  CaseKind kind;
  ksprune::GenerationBundle bundle;
  std::string planted_token;  // for kPlanted
};

struct PlantedDetect {
  fs::path manifest;
  fs::path fixtures;
  fs::path vectors;
  std::vector<DetectCase> cases;
};

PlantedDetect write_planted_detect(const fs::path& dir, std::size_t groups_per_kind = 3);

/// Orthogonal unit vectors, one per distinct text.
ksprune::VectorTable orthogonal_vectors(const std::set<std::string>& texts);

}  // namespace kst
