#include "modeltalk/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "modeltalk/text.hpp"

namespace modeltalk {

std::vector<std::string> TfidfVectorizer::terms_of(std::string_view text) {
  auto tt = tokenize(text);
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (tt.is_separator(i)) continue;
    terms.push_back(tt.tokens[i]);
    if (i + 1 < tt.size() && !tt.is_separator(i + 1)) {
      terms.push_back(tt.tokens[i] + " " + tt.tokens[i + 1]);
    }
  }
  return terms;
}

TfidfVectorizer::TfidfVectorizer(const std::vector<std::string>& documents) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    auto terms = terms_of(doc);
    std::set<std::string> unique(terms.begin(), terms.end());
    for (const auto& t : unique) ++df[t];
  }
  const double n = static_cast<double>(documents.size());
  for (const auto& [term, count] : df) {
    index_.emplace(term, terms_.size());
    terms_.push_back(term);
    idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
}

SparseVector TfidfVectorizer::embed(std::string_view text) const {
  std::map<std::size_t, double> tf;
  for (const auto& t : terms_of(text)) {
    auto it = index_.find(t);
    if (it != index_.end()) tf[it->second] += 1.0;
  }
  SparseVector v;
  v.reserve(tf.size());
  for (const auto& [i, count] : tf) v.emplace_back(i, count * idf_[i]);
  const double norm = l2_norm(v);
  if (norm > 0.0) {
    for (auto& [i, x] : v) x /= norm;
  }
  return v;
}

}  // namespace modeltalk
