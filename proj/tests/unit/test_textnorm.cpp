#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ksprune/textnorm.hpp"

using namespace ksprune;

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("The Liver, the Adrenal-Gland!"),
            (TokenSeq{"the", "liver", "the", "adrenal", "gland"}));
  EXPECT_EQ(tokenize("  "), TokenSeq{});
  EXPECT_EQ(tokenize("H2O is 42"), (TokenSeq{"h2o", "is", "42"}));
}

TEST(Tokenize, DropsPossessives) {
  EXPECT_EQ(tokenize("the cell's wall"), (TokenSeq{"the", "cell", "wall"}));
  EXPECT_EQ(tokenize("the cell\xE2\x80\x99s wall"), (TokenSeq{"the", "cell", "wall"}));
  EXPECT_EQ(tokenize("it's"), (TokenSeq{"it"}));
}

TEST(Tokenize, HandlesUnicodeAndBadBytes) {
  EXPECT_EQ(tokenize("\xC3\x98rsted NA\xC3\x8FVE"), (TokenSeq{"\xC3\xB8rsted", "na\xC3\xAFve"}));
  EXPECT_EQ(tokenize("ab\xFF" "cd"), (TokenSeq{"ab", "cd"}));
}

TEST(Lemmatizer, AgreesWithReferenceFixture) {
  std::ifstream in(std::string(KSPRUNE_TEST_DIR) + "/oracles/lemma_fixture.tsv");
  ASSERT_TRUE(in) << "missing lemma fixture";
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> misses;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string word = line.substr(0, tab), want = line.substr(tab + 1);
    ++n;
    const std::string got = Lemmatizer::standard().lemma(word);
    if (got != want) misses.push_back(word + " -> " + got + " (want " + want + ")");
  }
  EXPECT_GT(n, 150u);
  std::ostringstream all;
  for (const auto& m : misses) all << m << "\n";
  EXPECT_TRUE(misses.empty()) << all.str();
}

TEST(Lemmatizer, IsIdempotent) {
  const auto& lem = Lemmatizer::standard();
  for (const char* w : {"organs", "studies", "running", "classes", "leaves", "boxes", "hoped", "children", "was",
                        "analyses", "glasses", "dying", "mass", "bus"}) {
    const auto once = lem.lemma(w);
    EXPECT_EQ(lem.lemma(once), once) << w;
  }
}

TEST(Lemmatizer, LeavesShortAndNonAsciiWordsAlone) {
  const auto& lem = Lemmatizer::standard();
  EXPECT_EQ(lem.lemma("gas"), "gas");
  EXPECT_EQ(lem.lemma("its"), "its");
  EXPECT_EQ(lem.lemma("na\xC3\xAFves"), "na\xC3\xAFves");
  EXPECT_EQ(lem.lemma("organs"), "organ");
}

TEST(Stopwords, BuiltInListAndContentSets) {
  const auto& sw = StopwordList::standard();
  EXPECT_EQ(sw.size(), 179u);
  EXPECT_TRUE(sw.contains("the"));
  EXPECT_TRUE(sw.contains("an"));
  EXPECT_FALSE(sw.contains("organ"));
  TextNormalizer norm;
  EXPECT_EQ(norm.content("an accessory organ"), (TokenSet{"accessory", "organ"}));
  EXPECT_EQ(norm.content("accessory organs"), (TokenSet{"accessory", "organ"}));
  EXPECT_EQ(norm.content("the and of"), TokenSet{});
  EXPECT_EQ(norm.tokens("the organs"), (TokenSeq{"the", "organ"}));
}

TEST(Stopwords, CustomFile) {
  kst::TempDir dir;
  kst::write_text(dir / "sw.txt", "# comment\norgan\n\nLiver\n");
  auto sw = std::make_shared<StopwordList>(StopwordList::from_file(dir / "sw.txt"));
  EXPECT_EQ(sw->size(), 2u);
  TextNormalizer norm(sw);
  EXPECT_EQ(norm.content("the liver organs"), (TokenSet{"the"}));
}
