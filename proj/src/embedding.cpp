#include "ksprune/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "http_transport.hpp"
#include "ksprune/errors.hpp"

namespace ksprune {

namespace {

constexpr char kMagic[4] = {'K', 'S', 'E', 'V'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string escape_tsv(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::vector<Embedding> embed_unique(EmbeddingProvider& provider, const std::string& a, const std::string& b) {
  if (a == b) {
    std::vector<std::string> one{a};
    auto v = provider.embed(one);
    return {v.at(0), v.at(0)};
  }
  std::vector<std::string> two{a, b};
  return provider.embed(two);
}

std::string unescape_tsv(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: out.push_back(s[i]);
    }
  }
  return out;
}

bool parse_hex_hash(std::string_view hex, ContentHash& out) {
  if (hex.size() != 32) return false;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < 16; ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return false;
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return true;
}

}  // namespace

double raw_cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ConsistencyError("embedding dimensionality mismatch: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

EmbedScore embed_sim(EmbeddingProvider& provider, const std::string& a, const std::string& b) {
  const auto vecs = embed_unique(provider, a, b);
  EmbedScore out;
  out.raw = raw_cosine(vecs[0], vecs[1]);
  out.score = std::clamp(out.raw, 0.0, 1.0);
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& vector_file) {
  return std::filesystem::path(vector_file.string() + ".manifest.tsv");
}

VectorTable read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vector file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());

  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw ConsistencyError(path.string() + ": not a KSEV vector file");
  }
  VectorTable table;
  table.dim = get_u32(p + 4);
  if (table.dim == 0) throw ConsistencyError(path.string() + ": dimension is 0");
  const std::size_t record = 16 + 4 * table.dim;
  if ((data.size() - 8) % record != 0) {
    throw ConsistencyError(path.string() + ": truncated record (size not a multiple of the record length)");
  }
  for (std::size_t off = 8; off < data.size(); off += record) {
    ContentHash key;
    std::memcpy(key.data(), p + off, 16);
    Embedding vec(table.dim);
    for (std::size_t i = 0; i < table.dim; ++i) vec[i] = std::bit_cast<float>(get_u32(p + off + 16 + 4 * i));
    table.vectors[key] = std::move(vec);
  }

  std::ifstream manifest(manifest_path_for(path), std::ios::binary);
  std::string line;
  while (manifest && std::getline(manifest, line)) {
    const auto tab = line.find('\t');
    ContentHash key;
    if (tab == std::string::npos || !parse_hex_hash(std::string_view(line).substr(0, tab), key)) continue;
    if (table.vectors.contains(key)) table.texts[key] = unescape_tsv(std::string_view(line).substr(tab + 1));
  }
  return table;
}

void write_vector_file(const std::filesystem::path& path, const VectorTable& table) {
  if (table.dim == 0) throw ConfigError("cannot write a vector file with dimension 0");
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(table.dim));
  for (const auto& [key, vec] : table.vectors) {
    if (vec.size() != table.dim) throw ConsistencyError("vector length differs from table dimension");
    out.append(reinterpret_cast<const char*>(key.data()), key.size());
    for (float f : vec) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write vector file " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing " + path.string());
  }
  std::ofstream m(manifest_path_for(path), std::ios::binary | std::ios::trunc);
  if (!m) throw IoError("cannot write " + manifest_path_for(path).string());
  for (const auto& [key, text] : table.texts) m << to_hex(key) << '\t' << escape_tsv(text) << '\n';
}

VectorFileProvider::VectorFileProvider(const std::filesystem::path& path) : table_(read_vector_file(path)) {}

bool VectorFileProvider::contains(std::string_view text) const {
  return table_.vectors.contains(content_hash(text));
}

std::vector<Embedding> VectorFileProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = table_.vectors.find(content_hash(t));
    if (it == table_.vectors.end()) {
      throw LookupError("text not present in vector file (hash " + to_hex(content_hash(t)) + "): \"" +
                        t.substr(0, 60) + "\"");
    }
    out.push_back(it->second);
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingOptions options) : options_(std::move(options)) {
  if (options_.max_batch == 0) options_.max_batch = 1;
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
}

std::size_t HttpEmbeddingProvider::dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

std::vector<Embedding> HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  auto reply = http::with_retries(options_.attempts, std::chrono::milliseconds(200), [&] {
    return http::post_json(options_.base_url, "/embed", body, {}, options_.timeout_seconds);
  });
  if (!reply.contains("vectors") || !reply["vectors"].is_array()) {
    throw TransportError("/embed reply has no \"vectors\" array");
  }
  auto vectors = reply["vectors"].get<std::vector<Embedding>>();
  if (vectors.size() != texts.size()) {
    throw ConsistencyError("/embed returned " + std::to_string(vectors.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = reply.value("dim", vectors.empty() ? std::size_t{0} : vectors.front().size());
  std::lock_guard lock(mu_);
  if (dim_ == 0) dim_ = dim;
  for (const auto& v : vectors) {
    if (v.size() != dim_) {
      throw ConsistencyError("/embed dimensionality changed: expected " + std::to_string(dim_) + ", got " +
                             std::to_string(v.size()));
    }
  }
  return vectors;
}

std::vector<Embedding> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<std::span<const std::string>> batches;
  for (std::size_t i = 0; i < texts.size(); i += options_.max_batch) {
    batches.push_back(texts.subspan(i, std::min(options_.max_batch, texts.size() - i)));
  }
  std::vector<std::vector<Embedding>> results(batches.size());
  // Waves of at most max_in_flight concurrent requests; results land in
  // their batch slot so output order equals input order.
  for (std::size_t start = 0; start < batches.size(); start += options_.max_in_flight) {
    const std::size_t end = std::min(batches.size(), start + options_.max_in_flight);
    std::vector<std::future<std::vector<Embedding>>> pending;
    for (std::size_t b = start; b < end; ++b) {
      pending.push_back(std::async(std::launch::async, [this, batch = batches[b]] { return embed_batch(batch); }));
    }
    for (std::size_t b = start; b < end; ++b) results[b] = pending[b - start].get();
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (auto& r : results) {
    for (auto& v : r) out.push_back(std::move(v));
  }
  return out;
}

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                                 std::filesystem::path cache_file)
    : inner_(std::move(inner)), cache_file_(std::move(cache_file)) {
  if (!cache_file_.empty() && std::filesystem::exists(cache_file_)) {
    try {
      table_ = read_vector_file(cache_file_);
    } catch (const Error& e) {
      spdlog::warn("embedding cache {} is unreadable ({}); rebuilding", cache_file_.string(), e.what());
      table_ = {};
      dirty_ = true;
    }
  }
}

std::size_t CachedEmbeddingProvider::dim() const {
  if (table_.dim) return table_.dim;
  return inner_->dim();
}

std::vector<Embedding> CachedEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> missing;
  std::vector<ContentHash> missing_keys;
  for (const auto& t : texts) {
    const auto key = content_hash(t);
    if (table_.vectors.contains(key)) continue;
    if (std::find(missing_keys.begin(), missing_keys.end(), key) != missing_keys.end()) continue;
    missing.push_back(t);
    missing_keys.push_back(key);
  }
  if (!missing.empty()) {
    auto fresh = inner_->embed(missing);
    misses_ += missing.size();
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (table_.dim == 0) table_.dim = fresh[i].size();
      if (fresh[i].size() != table_.dim) {
        throw ConsistencyError("embedding dimensionality mismatch between cache and provider");
      }
      table_.vectors[missing_keys[i]] = std::move(fresh[i]);
      table_.texts[missing_keys[i]] = missing[i];
    }
    dirty_ = true;
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(table_.vectors.at(content_hash(t)));
  return out;
}

void CachedEmbeddingProvider::save() {
  std::lock_guard lock(mu_);
  if (!dirty_ || cache_file_.empty() || table_.dim == 0) return;
  write_vector_file(cache_file_, table_);
  dirty_ = false;
}

}  // namespace ksprune
