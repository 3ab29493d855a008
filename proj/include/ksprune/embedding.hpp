#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksprune/hashing.hpp"

namespace ksprune {

using Embedding = std::vector<float>;

/// Source of sentence embeddings. Implementations return exactly one
/// dim()-length vector per input text, in input order, and are deterministic
/// for identical text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

/// Raw cosine of two equal-length vectors; 0 if either has zero norm.
/// Throws ConsistencyError on a length mismatch.
double raw_cosine(std::span<const float> a, std::span<const float> b);

struct EmbedScore {
  double score = 0.0;  // clamped to [0, 1]
  double raw = 0.0;    // unclamped cosine, kept for debug output
};

EmbedScore embed_sim(EmbeddingProvider& provider, const std::string& a, const std::string& b);

// ---------------------------------------------------------------------------
// KSEV vector file: "KSEV", u32 dim (LE), then records of
// [16-byte content hash][dim x float32 LE]. A sidecar "<file>.manifest.tsv"
// maps hex hash -> text for auditing.

struct VectorTable {
  std::size_t dim = 0;
  std::map<ContentHash, Embedding> vectors;  // ordered: files are written in hash order
  std::map<ContentHash, std::string> texts;  // optional audit text
};

VectorTable read_vector_file(const std::filesystem::path& path);
/// Writes the table and its manifest sidecar.
void write_vector_file(const std::filesystem::path& path, const VectorTable& table);
std::filesystem::path manifest_path_for(const std::filesystem::path& vector_file);

/// Looks texts up by content hash in a pre-computed vector file.
class VectorFileProvider : public EmbeddingProvider {
 public:
  explicit VectorFileProvider(const std::filesystem::path& path);
  explicit VectorFileProvider(VectorTable table) : table_(std::move(table)) {}

  std::size_t dim() const override { return table_.dim; }
  /// Throws LookupError naming the first text missing from the file.
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  bool contains(std::string_view text) const;

 private:
  VectorTable table_;
};

struct HttpEmbeddingOptions {
  std::string base_url = "http://127.0.0.1:8080";
  std::size_t max_batch = 256;
  std::size_t max_in_flight = 8;
  int attempts = 3;
  double timeout_seconds = 60.0;
};

/// Client for the `/embed` sidecar: POST {"texts": [...]} ->
/// {"dim": D, "vectors": [[...]...]}. Batches are sent with bounded
/// concurrency and reassembled in input order.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingOptions options);

  /// Known after the first successful response; 0 before that.
  std::size_t dim() const override;
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::vector<Embedding> embed_batch(std::span<const std::string> texts);

  HttpEmbeddingOptions options_;
  mutable std::mutex mu_;
  std::size_t dim_ = 0;
};

/// Memoizes another provider by content hash and persists the cache as a
/// KSEV file. A cache file that fails to parse is discarded with a warning.
class CachedEmbeddingProvider : public EmbeddingProvider {
 public:
  CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, std::filesystem::path cache_file);

  std::size_t dim() const override;
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

  /// Writes the cache if anything new was added.
  void save();
  std::size_t cached() const { return table_.vectors.size(); }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::filesystem::path cache_file_;
  VectorTable table_;
  std::size_t misses_ = 0;
  bool dirty_ = false;
  std::mutex mu_;
};

}  // namespace ksprune
