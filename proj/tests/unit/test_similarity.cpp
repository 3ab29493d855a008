#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ksprune/errors.hpp"
#include "ksprune/similarity.hpp"
#include "ksprune/tfidf.hpp"

using namespace ksprune;

TEST(Jaccard, Basics) {
  EXPECT_DOUBLE_EQ(jaccard_sim({"a", "b"}, {"a", "b"}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_sim({"a", "b"}, {"b", "c"}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(jaccard_sim({"a"}, {"b"}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_sim({}, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_sim({"a"}, {}), 0.0);
}

TEST(Metric, NamesRoundTrip) {
  for (Metric m : {Metric::kJaccard, Metric::kTfIdf, Metric::kEmbed}) EXPECT_EQ(parse_metric(metric_name(m)), m);
  EXPECT_THROW(parse_metric("cosine"), ConfigError);
}

TEST(QueryText, JoinsSelectedFields) {
  EXPECT_EQ(query_text(" ctx\n here ", "why?", "because", FieldScope::kCQ), "ctx here why?");
  EXPECT_EQ(query_text("", "why?", "because", FieldScope::kCQA), "why? because");
  EXPECT_EQ(query_text("c", "q", " a ", FieldScope::kA), "a");
}

namespace {

std::vector<std::string> toy() { return {"red fox", "red dog", "blue cat", "green bird"}; }

}  // namespace

TEST(TfIdf, ToyCorpusMatchesCommittedOracle) {
  std::ifstream in(std::string(KSPRUNE_TEST_DIR) + "/oracles/tfidf_toy_expected.tsv");
  ASSERT_TRUE(in);
  const auto docs = toy();
  TextNormalizer norm;
  const auto model = TfIdfModel::fit_texts(docs, norm);
  std::size_t i, j;
  double want;
  int n = 0;
  while (in >> i >> j >> want) {
    EXPECT_NEAR(model.cosine(i, j), want, 1e-12) << i << "," << j;
    ++n;
  }
  EXPECT_EQ(n, 6);
  const double l1 = std::log(4.0 / 3.0), l2 = std::log(2.0);
  EXPECT_NEAR(model.cosine(0, 1), l1 * l1 / (l1 * l1 + l2 * l2), 1e-12);
}

TEST(TfIdf, IdfIsClampedAtZero) {
  std::vector<std::string> docs = {"alpha beta", "alpha gamma", "alpha delta"};
  TextNormalizer norm;
  const auto model = TfIdfModel::fit_texts(docs, norm);
  EXPECT_EQ(model.idf("alpha"), 0.0);
  EXPECT_NEAR(model.idf("beta"), std::log(3.0 / 2.0), 1e-15);
  EXPECT_EQ(model.idf("unknown"), 0.0);
  EXPECT_EQ(model.df("alpha"), 3u);
  EXPECT_EQ(model.cosine(0, 1), 0.0);
}

TEST(TfIdf, ZeroVectorsScoreZeroAndIdenticalDocsScoreOne) {
  std::vector<std::string> docs = {"same words here", "same words here", "other text entirely", "x"};
  TextNormalizer norm;
  const auto model = TfIdfModel::fit_texts(docs, norm);
  EXPECT_NEAR(model.cosine(0, 1), 1.0, 1e-12);
  EXPECT_EQ(model.cosine(model.vectorize({}), model.doc_vector(0)), 0.0);
}

TEST(TfIdf, TermIdsFollowLexicographicOrder) {
  TextNormalizer norm;
  const auto model = TfIdfModel::fit_texts(toy(), norm);
  const auto& terms = model.terms();
  EXPECT_TRUE(std::is_sorted(terms.begin(), terms.end()));
  EXPECT_EQ(model.term_id("bird"), 0);
  EXPECT_EQ(model.term_id("blue"), 1);
  EXPECT_EQ(model.term_id("zebra"), -1);
}

TEST(TfIdf, JsonRoundTripPreservesScores) {
  TextNormalizer norm;
  const auto docs = toy();
  const auto model = TfIdfModel::fit_texts(docs, norm);
  auto copy = TfIdfModel::from_json(model.to_json());
  std::vector<TokenSeq> toks;
  for (const auto& d : docs) toks.push_back(norm.tokens(d));
  copy.attach_documents(toks);
  EXPECT_EQ(copy.cosine(0, 1), model.cosine(0, 1));
  EXPECT_EQ(copy.to_json(), model.to_json());
}
