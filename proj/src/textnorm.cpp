#include "ksprune/textnorm.hpp"

#include <fstream>
#include <sstream>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "ksprune/embedded_resources.hpp"
#include "ksprune/errors.hpp"

namespace ksprune {

namespace {

bool is_word_char(UChar32 c) {
  return u_isalnum(c) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

bool is_apostrophe(UChar32 c) { return c == 0x27 || c == 0x2019; }

void append_lower(std::string& out, UChar32 c) {
  c = u_tolower(c);
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  U8_APPEND_UNSAFE(buf, len, c);
  out.append(buf, static_cast<std::size_t>(len));
}

// Iterates non-comment, non-blank lines of an embedded or on-disk table.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    fn(line);
  }
}

std::unordered_set<std::string> parse_word_list(std::string_view text) {
  std::unordered_set<std::string> words;
  for_each_line(text, [&](std::string_view line) { words.emplace(line); });
  return words;
}

std::unordered_map<std::string, std::string> parse_exceptions(std::string_view text) {
  std::unordered_map<std::string, std::string> table;
  for_each_line(text, [&](std::string_view line) {
    const auto split = line.find_first_of(" \t");
    if (split == std::string_view::npos) {
      table.emplace(std::string(line), std::string(line));
      return;
    }
    std::string_view lemma = line.substr(line.find_first_not_of(" \t", split));
    table.emplace(std::string(line.substr(0, split)), std::string(lemma));
  });
  return table;
}

bool ends_with(std::string_view s, std::string_view suffix) { return s.ends_with(suffix); }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool all_ascii_lower(std::string_view s) {
  for (char c : s) {
    if (c < 'a' || c > 'z') return false;
  }
  return true;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;

  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };

  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c >= 0 && is_word_char(c)) {
      append_lower(current, c);
      continue;
    }
    // Possessive: word + apostrophe + s + non-word (or end).
    if (c >= 0 && is_apostrophe(c) && !current.empty()) {
      int32_t j = i;
      if (j < length) {
        UChar32 s;
        U8_NEXT(bytes, j, length, s);
        if (s == 's' || s == 'S') {
          UChar32 after = -1;
          if (j < length) {
            int32_t k = j;
            U8_NEXT(bytes, k, length, after);
          }
          if (after < 0 || !is_word_char(after)) {
            i = j;
            flush();
            continue;
          }
        }
      }
    }
    flush();
  }
  flush();
  return tokens;
}

Lemmatizer::Lemmatizer()
    : Lemmatizer(parse_exceptions(resources::kLemmaExceptions), parse_word_list(resources::kVerbStems),
                 parse_word_list(resources::kStopwordsEn)) {}

Lemmatizer::Lemmatizer(std::unordered_map<std::string, std::string> exceptions,
                       std::unordered_set<std::string> verb_stems, std::unordered_set<std::string> frozen)
    : exceptions_(std::move(exceptions)), verb_stems_(std::move(verb_stems)), frozen_(std::move(frozen)) {}

const Lemmatizer& Lemmatizer::standard() {
  static const Lemmatizer instance;
  return instance;
}

std::string Lemmatizer::reduce_verb(const std::string& w) const {
  auto known = [&](const std::string& s) { return verb_stems_.contains(s); };
  // -ying -> -ie (dying -> die)
  if (ends_with(w, "ying") && w.size() > 5) {
    std::string ie = w.substr(0, w.size() - 4) + "ie";
    if (known(ie)) return ie;
  }
  // -ied -> -y (studied -> study)
  if (ends_with(w, "ied") && w.size() > 4) {
    std::string y = w.substr(0, w.size() - 3) + "y";
    if (known(y)) return y;
  }
  std::size_t cut = 0;
  if (ends_with(w, "ing") && w.size() > 4) cut = 3;
  else if (ends_with(w, "ed") && w.size() > 3) cut = 2;
  if (cut == 0) return w;

  const std::string stem = w.substr(0, w.size() - cut);
  if (known(stem + "e") && !ends_with(stem, "e")) return stem + "e";
  if (known(stem)) return stem;
  const std::size_t n = stem.size();
  if (n >= 3 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1])) {
    std::string undoubled = stem.substr(0, n - 1);
    if (known(undoubled)) return undoubled;
  }
  return w;
}

std::string Lemmatizer::reduce_once(const std::string& w) const {
  if (auto it = exceptions_.find(w); it != exceptions_.end()) return it->second;
  if (frozen_.contains(w)) return w;
  if (w.size() <= 3 || !all_ascii_lower(w)) return w;

  if (ends_with(w, "ing") || ends_with(w, "ed")) return reduce_verb(w);

  if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses") || ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") ||
      ends_with(w, "zzes")) {
    return w.substr(0, w.size() - 2);
  }
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
  if (ends_with(w, "s")) return w.substr(0, w.size() - 1);
  return w;
}

std::string Lemmatizer::lemma(std::string_view token) const {
  std::string current(token);
  // Every rule shortens the word or maps into the exception table, so this
  // terminates; the cap guards against a cyclic exception table.
  for (int step = 0; step < 8; ++step) {
    std::string next = reduce_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

TokenSeq Lemmatizer::lemmatize(const TokenSeq& seq) const {
  TokenSeq out;
  out.reserve(seq.size());
  for (const auto& t : seq) out.push_back(lemma(t));
  return out;
}

StopwordList::StopwordList() : words_(parse_word_list(resources::kStopwordsEn)) {}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read stopword list " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::unordered_set<std::string> words;
  for (const auto& w : parse_word_list(buffer.str())) {
    std::string lower;
    const auto* p = reinterpret_cast<const uint8_t*>(w.data());
    const auto n = static_cast<int32_t>(w.size());
    for (int32_t i = 0; i < n;) {
      UChar32 c;
      U8_NEXT(p, i, n, c);
      if (c >= 0) append_lower(lower, c);
    }
    words.insert(std::move(lower));
  }
  return StopwordList(std::move(words));
}

const StopwordList& StopwordList::standard() {
  static const StopwordList instance;
  return instance;
}

TokenSeq lemmatize(const TokenSeq& seq) { return Lemmatizer::standard().lemmatize(seq); }

TokenSet content_set(const TokenSeq& seq, bool drop_stopwords, const StopwordList& stopwords) {
  TokenSet out;
  for (const auto& t : seq) {
    if (drop_stopwords && stopwords.contains(t)) continue;
    out.insert(t);
  }
  return out;
}

TextNormalizer::TextNormalizer()
    : stopwords_(std::shared_ptr<const StopwordList>(&StopwordList::standard(), [](const StopwordList*) {})) {}

TextNormalizer::TextNormalizer(std::shared_ptr<const StopwordList> stopwords) : stopwords_(std::move(stopwords)) {
  if (!stopwords_) stopwords_ = std::shared_ptr<const StopwordList>(&StopwordList::standard(), [](const StopwordList*) {});
}

TokenSeq TextNormalizer::tokens(std::string_view text) const { return lemmatize(tokenize(text)); }

TokenSet TextNormalizer::content(std::string_view text) const {
  return content_set(tokens(text), true, *stopwords_);
}

}  // namespace ksprune
