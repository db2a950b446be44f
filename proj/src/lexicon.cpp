#include <fmt/format.h>

#include <fstream>
#include <set>

#include "modeltalk/errors.hpp"
#include "modeltalk/explain.hpp"

namespace modeltalk {

namespace {

using LexiconMap = std::map<std::string, std::vector<std::string>, std::less<>>;

// A substitute must survive tokenization unchanged so edited texts re-predict
// exactly as scored.
bool is_single_token(const std::string& word) {
  auto tt = tokenize(word);
  return tt.size() == 1 && tt.tokens[0] == word;
}

void insert_clean(LexiconMap& into, const std::string& word,
                  const std::vector<std::string>& subs) {
  auto key = to_lower(trim(word));
  if (key.empty()) return;
  auto& list = into[key];
  std::set<std::string> seen(list.begin(), list.end());
  for (const auto& raw : subs) {
    auto s = to_lower(trim(raw));
    if (s.empty() || s == key || !is_single_token(s) || !seen.insert(s).second) continue;
    list.push_back(s);
  }
  if (list.empty()) into.erase(key);
}

LexiconMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open lexicon " + path.string());
  LexiconMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto tab = t.find('\t');
    if (tab == std::string_view::npos) {
      throw LoadError(fmt::format("{}:{}: expected word<TAB>sub1,sub2,...",
                                  path.string(), line_no));
    }
    insert_clean(out, std::string(t.substr(0, tab)), split(t.substr(tab + 1), ','));
  }
  return out;
}

const std::vector<std::string>& empty_list() {
  static const std::vector<std::string> empty;
  return empty;
}

}  // namespace

SynonymLexicon::SynonymLexicon(std::map<std::string, std::vector<std::string>> synonyms,
                               std::map<std::string, std::vector<std::string>> antonyms) {
  for (const auto& [w, subs] : synonyms) insert_clean(synonyms_, w, subs);
  for (const auto& [w, subs] : antonyms) insert_clean(antonyms_, w, subs);
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& synonyms,
                                    const std::optional<std::filesystem::path>& antonyms) {
  SynonymLexicon lex;
  lex.synonyms_ = load_map(synonyms);
  if (antonyms) lex.antonyms_ = load_map(*antonyms);
  return lex;
}

void SynonymLexicon::merge(const SynonymLexicon& other) {
  for (const auto& [w, subs] : other.synonyms_) insert_clean(synonyms_, w, subs);
  for (const auto& [w, subs] : other.antonyms_) insert_clean(antonyms_, w, subs);
}

const std::vector<std::string>& SynonymLexicon::synonyms(std::string_view word) const {
  auto it = synonyms_.find(to_lower(word));
  return it == synonyms_.end() ? empty_list() : it->second;
}

const std::vector<std::string>& SynonymLexicon::antonyms(std::string_view word) const {
  auto it = antonyms_.find(to_lower(word));
  return it == antonyms_.end() ? empty_list() : it->second;
}

}  // namespace modeltalk
