#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace modeltalk {

// Joins the fields of multi-field instances. Never attributed, attacked or
// counted as a feature.
inline constexpr std::string_view kFieldSeparator = "[SEP]";

struct TextSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct TokenizedText {
  std::vector<std::string> tokens;
  // Byte range of each token's core (punctuation stripped) in the source.
  std::vector<TextSpan> spans;
  // Sentence index of each token; sentences end at '.', '!', '?' or a
  // field separator.
  std::vector<std::size_t> sentence;
  // Token -> occurrence count, field separators excluded.
  std::map<std::string, double> counts;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::size_t sentence_count() const {
    return sentence.empty() ? 0 : sentence.back() + 1;
  }
  bool is_separator(std::size_t i) const { return tokens[i] == kFieldSeparator; }
};

// Lowercase, whitespace split, strip leading/trailing ASCII punctuation,
// drop empty tokens. Interior punctuation ("don't") is kept.
TokenizedText tokenize(std::string_view text);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Frozen 127-word English stopword list.
bool is_stopword(std::string_view token);
const std::vector<std::string>& stopwords();

// Platform-independent helpers over mt19937_64 (std distributions are
// implementation defined).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng,
                                                    std::size_t population,
                                                    std::size_t count);

}  // namespace modeltalk
