#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "http_stub.hpp"
#include "ksprune/errors.hpp"
#include "ksprune/generator.hpp"

using namespace ksprune;

namespace {

GenerationBundle bundle(const std::string& q, std::optional<std::size_t> row, const std::string& a_o) {
  GenerationBundle b;
  b.query = {"ds", row, "ctx", q, "gold"};
  b.a_o = a_o;
  b.samples = {a_o + "1", a_o + "2"};
  return b;
}

}  // namespace

TEST(Prompt, SubstitutesPlaceholders) {
  GenerationRequest r{"d", 0, "The liver.", "What organ?", ""};
  EXPECT_EQ(render_prompt(kDefaultPromptTemplate, r), "<|user|>\nThe liver.\nWhat organ?");
  EXPECT_EQ(render_prompt("{question}|{question}|{other}", r), "What organ?|What organ?|{other}");
}

TEST(FixtureGenerator, ReplaysByRefThenQuestion) {
  FixtureGenerator gen({bundle("q1", 3, "x"), bundle("q2", std::nullopt, "y")});
  GenerationRequest by_ref{"ds", 3, "", "other question", ""};
  EXPECT_EQ(gen.generate(by_ref, 0), "x");
  EXPECT_EQ(gen.generate(by_ref, 2), "x2");
  GenerationRequest by_q{"elsewhere", std::nullopt, "", "q2", ""};
  EXPECT_EQ(gen.generate(by_q, 1), "y1");
  EXPECT_THROW(gen.generate(by_q, 3), LookupError);
  EXPECT_THROW(gen.generate({"ds", 9, "", "nope", ""}, 0), LookupError);
}

TEST(FixtureGenerator, FileRoundTripAndBadLines) {
  kst::TempDir dir;
  const auto b = bundle("q", 1, "ans");
  kst::write_text(dir / "f.jsonl", bundle_to_json(b).dump() + "\n{broken\n\n");
  FixtureGenerator gen(dir / "f.jsonl");
  EXPECT_EQ(gen.skipped(), 1u);
  ASSERT_EQ(gen.bundles().size(), 1u);
  const auto replay = generate_bundle(gen, b.query, 2);
  EXPECT_EQ(replay.a_o, b.a_o);
  EXPECT_EQ(replay.samples, b.samples);
  EXPECT_EQ(generate_bundle(gen, b.query, 2).samples, replay.samples);
  EXPECT_THROW(generate_bundle(gen, b.query, 0), ConfigError);
  EXPECT_THROW(FixtureGenerator(dir / "missing.jsonl"), ConfigError);
}

TEST(ChatGenerator, SendsPromptKeyAndSeed) {
  nlohmann::json seen;
  std::string auth;
  kst::StubServer server("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"liver"}}]})", "application/json");
  });
  ChatGeneratorOptions o;
  o.base_url = server.url();
  o.model = "tiny";
  o.api_key = "secret";
  o.sampling.seed = 10;
  ChatCompletionGenerator gen(o);
  GenerationRequest r{"d", 0, "C", "Q", ""};
  EXPECT_EQ(gen.generate(r, 2), "liver");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(seen["model"], "tiny");
  EXPECT_EQ(seen["seed"], 12);
  EXPECT_EQ(seen["top_k"], 50);
  EXPECT_EQ(seen["messages"][0]["content"], "<|user|>\nC\nQ");
}

TEST(ChatGenerator, EmptyCompletionIsNotAnError) {
  kst::StubServer server("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":null}}]})", "application/json");
  });
  ChatGeneratorOptions o;
  o.base_url = server.url();
  ChatCompletionGenerator gen(o);
  EXPECT_EQ(gen.generate({"d", 0, "C", "Q", ""}, 0), "");
}

TEST(ChatGenerator, RetriesThenSurfacesTransportFailure) {
  kst::StubServer server("/v1/chat/completions",
                         [](const httplib::Request&, httplib::Response& res) { res.status = 502; });
  ChatGeneratorOptions o;
  o.base_url = server.url();
  o.backoff = std::chrono::milliseconds(1);
  ChatCompletionGenerator gen(o);
  EXPECT_THROW(gen.generate({"d", 0, "C", "Q", ""}, 0), TransportError);
  EXPECT_EQ(server.calls.load(), 3);
}
