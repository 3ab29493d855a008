#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ksprune {

/// Ordered tokens, lowercase, never empty strings.
using TokenSeq = std::vector<std::string>;
/// Unique tokens. std::set keeps iteration (and therefore output) order stable.
using TokenSet = std::set<std::string>;

/// Splits text into maximal runs of Unicode letters and digits, lowercased.
/// A trailing possessive ('s or ’s) is dropped. Invalid UTF-8 bytes act as
/// separators.
TokenSeq tokenize(std::string_view text);

/// Rule-based English lemmatizer: irregular-form table, then plural and
/// regular -ing/-ed reduction. Verb endings are only stripped when the stem
/// is a known base form. Applied to a fixed point, so it is idempotent.
class Lemmatizer {
 public:
  /// Built from the embedded resource tables.
  Lemmatizer();
  Lemmatizer(std::unordered_map<std::string, std::string> exceptions,
             std::unordered_set<std::string> verb_stems, std::unordered_set<std::string> frozen);

  std::string lemma(std::string_view token) const;
  TokenSeq lemmatize(const TokenSeq& seq) const;

  static const Lemmatizer& standard();

 private:
  std::string reduce_once(const std::string& word) const;
  std::string reduce_verb(const std::string& word) const;

  std::unordered_map<std::string, std::string> exceptions_;
  std::unordered_set<std::string> verb_stems_;
  std::unordered_set<std::string> frozen_;
};

class StopwordList {
 public:
  /// The embedded 179-word English list.
  StopwordList();
  explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// One word per line; blank lines and lines starting with '#' are ignored.
  static StopwordList from_file(const std::filesystem::path& path);
  static const StopwordList& standard();

  bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

TokenSeq lemmatize(const TokenSeq& seq);

TokenSet content_set(const TokenSeq& seq, bool drop_stopwords,
                     const StopwordList& stopwords = StopwordList::standard());

/// Shared normalization front end: tokenize, lemmatize, and the two set views
/// the similarity channels need.
class TextNormalizer {
 public:
  TextNormalizer();
  explicit TextNormalizer(std::shared_ptr<const StopwordList> stopwords);

  TokenSeq tokens(std::string_view text) const;
  /// Lemmatized, stopword-filtered set. This is the Jaccard-channel view and
  /// the view used for answer/context difference sets.
  TokenSet content(std::string_view text) const;
  const StopwordList& stopwords() const { return *stopwords_; }

 private:
  std::shared_ptr<const StopwordList> stopwords_;
};

}  // namespace ksprune
