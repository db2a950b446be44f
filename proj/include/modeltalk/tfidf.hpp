#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "modeltalk/sparse.hpp"

namespace modeltalk {

// Anything that maps text to a vector whose dot products are cosines.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual SparseVector embed(std::string_view text) const = 0;
};

// Unigram + bigram TF-IDF, L2-normalized. Smoothed idf:
// ln((1 + N) / (1 + df)) + 1. Unknown terms are ignored, so all-unknown text
// embeds to the zero vector.
class TfidfVectorizer : public EmbeddingProvider {
 public:
  TfidfVectorizer() = default;
  explicit TfidfVectorizer(const std::vector<std::string>& documents);

  SparseVector embed(std::string_view text) const override;

  std::size_t num_terms() const { return terms_.size(); }
  const std::string& term(std::size_t i) const { return terms_[i]; }
  double idf(std::size_t i) const { return idf_[i]; }

  // Unigrams and space-joined bigrams of a text, separators excluded.
  static std::vector<std::string> terms_of(std::string_view text);

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> idf_;
};

inline double cosine(const SparseVector& a, const SparseVector& b) {
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace modeltalk
