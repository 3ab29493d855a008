#include <atomic>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "http_stub.hpp"
#include "ksprune/embedding.hpp"
#include "ksprune/errors.hpp"
#include "ksprune/hashing.hpp"

using namespace ksprune;

namespace {

/// Deterministic provider that counts texts it was asked for.
class CountingProvider : public EmbeddingProvider {
 public:
  std::size_t dim() const override { return 2; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    calls += texts.size();
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back({static_cast<float>(t.size()), 1.0f});
    return out;
  }
  std::atomic<std::size_t> calls{0};
};

}  // namespace

TEST(Hashing, MatchesPythonBlake2b128) {
  EXPECT_EQ(hex_digest("abc"), "cf4ab791c62b8d2b2109c90275287816");
  EXPECT_EQ(hex_digest(""), "cae66941d9efbd404e4d88758ea67670");
  EXPECT_EQ(hex_digest("accessory organs"), "89a0575f711806848b44a7317f476454");
}

TEST(VectorFile, ReadsPythonExport) {
  const auto table = read_vector_file(std::string(KSPRUNE_TEST_DIR) + "/data/sample.ksev");
  EXPECT_EQ(table.dim, 3u);
  EXPECT_EQ(table.vectors.size(), 3u);
  EXPECT_EQ(table.texts.at(content_hash("caf\xC3\xA9 d\xC3\xA9j\xC3\xA0 vu")), "caf\xC3\xA9 d\xC3\xA9j\xC3\xA0 vu");
  VectorFileProvider p(std::string(KSPRUNE_TEST_DIR) + "/data/sample.ksev");
  EXPECT_NEAR(embed_sim(p, "alpha", "beta gamma").score, 0.6, 1e-7);
  EXPECT_NEAR(embed_sim(p, "alpha", "alpha").score, 1.0, 1e-12);
  const auto neg = embed_sim(p, "beta gamma", "caf\xC3\xA9 d\xC3\xA9j\xC3\xA0 vu");
  EXPECT_EQ(neg.score, 0.0);
  EXPECT_EQ(neg.raw, 0.0);
  EXPECT_THROW(embed_sim(p, "alpha", "missing"), LookupError);
}

TEST(VectorFile, WriterIsByteExact) {
  kst::TempDir dir;
  VectorTable t;
  t.dim = 2;
  t.vectors[content_hash("abc")] = {1.0f, -2.0f};
  t.texts[content_hash("abc")] = "abc\twith tab";
  write_vector_file(dir / "v.ksev", t);
  const std::string bytes = kst::read_text(dir / "v.ksev");
  std::string want = "KSEV";
  want += std::string("\x02\x00\x00\x00", 4);
  const auto h = content_hash("abc");
  want.append(reinterpret_cast<const char*>(h.data()), 16);
  want += std::string("\x00\x00\x80\x3f", 4);
  want += std::string("\x00\x00\x00\xc0", 4);
  EXPECT_EQ(bytes, want);
  EXPECT_EQ(read_vector_file(dir / "v.ksev").texts.at(h), "abc\twith tab");
}

TEST(VectorFile, RejectsCorruptFiles) {
  kst::TempDir dir;
  kst::write_text(dir / "bad.ksev", "KSEV\x02\x00\x00\x00short");
  EXPECT_THROW(read_vector_file(dir / "bad.ksev"), ConsistencyError);
  kst::write_text(dir / "magic.ksev", "NOPE");
  EXPECT_THROW(read_vector_file(dir / "magic.ksev"), ConsistencyError);
  EXPECT_THROW(read_vector_file(dir / "absent.ksev"), IoError);
}

TEST(Embedding, CosineDimensionMismatchThrows) {
  const std::vector<float> a{1, 0}, b{1, 0, 0};
  EXPECT_THROW(raw_cosine(a, b), ConsistencyError);
  const std::vector<float> z{0, 0};
  EXPECT_EQ(raw_cosine(a, z), 0.0);
}

TEST(CachedEmbedding, SecondRunMakesNoProviderCalls) {
  kst::TempDir dir;
  const std::vector<std::string> texts = {"one", "two", "three", "two"};
  auto inner = std::make_shared<CountingProvider>();
  {
    CachedEmbeddingProvider cache(inner, dir / "cache.ksev");
    const auto v = cache.embed(texts);
    EXPECT_EQ(v[1], v[3]);
    EXPECT_EQ(inner->calls.load(), 3u);
    cache.save();
  }
  inner->calls = 0;
  CachedEmbeddingProvider again(inner, dir / "cache.ksev");
  const auto v = again.embed(texts);
  EXPECT_EQ(inner->calls.load(), 0u);
  EXPECT_EQ(again.misses(), 0u);
  EXPECT_EQ(v[2], (Embedding{5.0f, 1.0f}));
}

TEST(CachedEmbedding, CorruptCacheIsRebuilt) {
  kst::TempDir dir;
  kst::write_text(dir / "cache.ksev", "garbage");
  auto inner = std::make_shared<CountingProvider>();
  CachedEmbeddingProvider cache(inner, dir / "cache.ksev");
  cache.embed(std::vector<std::string>{"x"});
  cache.save();
  EXPECT_EQ(inner->calls.load(), 1u);
  EXPECT_EQ(read_vector_file(dir / "cache.ksev").vectors.size(), 1u);
}

namespace {

void reply_vectors(const httplib::Request& req, httplib::Response& res) {
  const auto body = nlohmann::json::parse(req.body);
  nlohmann::json out;
  out["dim"] = 2;
  out["vectors"] = nlohmann::json::array();
  for (const auto& t : body["texts"]) {
    const float x = std::stof(t.get<std::string>().substr(1));
    out["vectors"].push_back({x, 1.0});
  }
  res.set_content(out.dump(), "application/json");
}

}  // namespace

TEST(HttpEmbedding, BatchesKeepInputOrder) {
  kst::StubServer server("/embed", reply_vectors);
  HttpEmbeddingOptions o;
  o.base_url = server.url();
  o.max_batch = 3;
  o.max_in_flight = 2;
  HttpEmbeddingProvider p(o);
  std::vector<std::string> texts;
  for (int i = 0; i < 11; ++i) texts.push_back("t" + std::to_string(i));
  const auto v = p.embed(texts);
  ASSERT_EQ(v.size(), 11u);
  for (int i = 0; i < 11; ++i) EXPECT_EQ(v[i][0], static_cast<float>(i));
  EXPECT_EQ(server.calls.load(), 4);
  EXPECT_EQ(p.dim(), 2u);
}

TEST(HttpEmbedding, RetriesServerErrorsButNotClientErrors) {
  std::atomic<int> failures{2};
  kst::StubServer flaky("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures-- > 0) {
      res.status = 503;
      return;
    }
    reply_vectors(req, res);
  });
  HttpEmbeddingOptions o;
  o.base_url = flaky.url();
  HttpEmbeddingProvider p(o);
  EXPECT_EQ(p.embed(std::vector<std::string>{"t5"})[0][0], 5.0f);
  EXPECT_EQ(flaky.calls.load(), 3);

  kst::StubServer bad("/embed", [](const httplib::Request&, httplib::Response& res) { res.status = 413; });
  o.base_url = bad.url();
  HttpEmbeddingProvider q(o);
  EXPECT_THROW(q.embed(std::vector<std::string>{"t1"}), Error);
  EXPECT_EQ(bad.calls.load(), 1);
}

TEST(HttpEmbedding, UnreachableServiceIsATransportError) {
  HttpEmbeddingOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.attempts = 2;
  o.timeout_seconds = 1;
  HttpEmbeddingProvider p(o);
  EXPECT_THROW(p.embed(std::vector<std::string>{"t1"}), TransportError);
}

TEST(HttpEmbedding, ShortReplyIsInconsistent) {
  kst::StubServer server("/embed", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"dim":2,"vectors":[[1,0]]})", "application/json");
  });
  HttpEmbeddingOptions o;
  o.base_url = server.url();
  HttpEmbeddingProvider p(o);
  EXPECT_THROW(p.embed(std::vector<std::string>{"a", "b"}), ConsistencyError);
}
