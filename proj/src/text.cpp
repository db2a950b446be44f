#include "modeltalk/text.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace modeltalk {

namespace {

// Length in bytes of a whitespace code point starting at s[i], 0 if none.
std::size_t whitespace_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' ||
      c == '\r') {
    return 1;
  }
  auto at = [&](std::size_t k) -> unsigned char {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0;
  };
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;
  if (c == 0xE2 && at(1) == 0x80 &&
      ((at(2) >= 0x80 && at(2) <= 0x8A) || at(2) == 0xA8 || at(2) == 0xA9 ||
       at(2) == 0xAF)) {
    return 3;
  }
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;
  return 0;
}

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

bool ends_sentence(std::string_view trailing) {
  return trailing.find_first_of(".!?") != std::string_view::npos;
}

const std::unordered_set<std::string_view>& stopword_set() {
  static const std::unordered_set<std::string_view> set = [] {
    std::unordered_set<std::string_view> s;
    for (const auto& w : stopwords()) s.insert(w);
    return s;
  }();
  return set;
}

}  // namespace

TokenizedText tokenize(std::string_view text) {
  TokenizedText out;
  std::size_t sentence = 0;
  bool sentence_open = false;

  auto close_sentence = [&] {
    if (sentence_open) {
      ++sentence;
      sentence_open = false;
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t ws = whitespace_length(text, i)) {
      i += ws;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && whitespace_length(text, end) == 0) ++end;
    std::string_view word = text.substr(i, end - i);

    if (word == kFieldSeparator) {
      close_sentence();
      out.tokens.emplace_back(kFieldSeparator);
      out.spans.push_back({i, word.size()});
      out.sentence.push_back(out.sentence.empty() ? 0 : out.sentence.back());
      i = end;
      continue;
    }

    std::size_t lead = 0;
    while (lead < word.size() && is_punct(word[lead])) ++lead;
    std::size_t tail = word.size();
    while (tail > lead && is_punct(word[tail - 1])) --tail;

    if (tail > lead) {
      out.tokens.push_back(to_lower(word.substr(lead, tail - lead)));
      out.spans.push_back({i + lead, tail - lead});
      out.sentence.push_back(sentence);
      sentence_open = true;
    }
    if (ends_sentence(word.substr(tail))) close_sentence();
    i = end;
  }

  for (std::size_t t = 0; t < out.tokens.size(); ++t) {
    if (!out.is_separator(t)) out.counts[out.tokens[t]] += 1.0;
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string_view trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n\v\f");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      break;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = {
      "i",       "me",         "my",      "myself",  "we",       "our",
      "ours",    "ourselves",  "you",     "your",    "yours",    "yourself",
      "yourselves", "he",      "him",     "his",     "himself",  "she",
      "her",     "hers",       "herself", "it",      "its",      "itself",
      "they",    "them",       "their",   "theirs",  "themselves", "what",
      "which",   "who",        "whom",    "this",    "that",     "these",
      "those",   "am",         "is",      "are",     "was",      "were",
      "be",      "been",       "being",   "have",    "has",      "had",
      "having",  "do",         "does",    "did",     "doing",    "a",
      "an",      "the",        "and",     "but",     "if",       "or",
      "because", "as",         "until",   "while",   "of",       "at",
      "by",      "for",        "with",    "about",   "against",  "between",
      "into",    "through",    "during",  "before",  "after",    "above",
      "below",   "to",         "from",    "up",      "down",     "in",
      "out",     "on",         "off",     "over",    "under",    "again",
      "further", "then",       "once",    "here",    "there",    "when",
      "where",   "why",        "how",     "all",     "any",      "both",
      "each",    "few",        "more",    "most",    "other",    "some",
      "such",    "no",         "nor",     "not",     "only",     "own",
      "same",    "so",         "than",    "too",     "very",     "s",
      "t",       "can",        "will",    "just",    "don",      "should",
      "now"};
  return words;
}

bool is_stopword(std::string_view token) {
  return stopword_set().contains(token);
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng,
                                                    std::size_t population,
                                                    std::size_t count) {
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), 0);
  count = std::min(count, population);
  for (std::size_t i = 0; i < count; ++i) {
    auto j = i + uniform_below(rng, population - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace modeltalk
