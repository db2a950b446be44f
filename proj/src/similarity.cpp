#include <algorithm>

#include "modeltalk/errors.hpp"
#include "modeltalk/explain.hpp"

namespace modeltalk {

namespace {

std::vector<std::string> instance_texts(const Dataset& dataset) {
  std::vector<std::string> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) out.push_back(inst.text());
  return out;
}

}  // namespace

SimilarityIndex::SimilarityIndex(const Dataset& dataset,
                                 std::shared_ptr<const EmbeddingProvider> embedder)
    : dataset_(&dataset), embedder_(std::move(embedder)) {
  const auto texts = instance_texts(dataset);
  if (!embedder_) embedder_ = std::make_shared<TfidfVectorizer>(texts);
  vectors_.reserve(texts.size());
  for (const auto& t : texts) vectors_.push_back(embedder_->embed(t));
}

std::vector<SimilarInstance> SimilarityIndex::query(std::string_view text,
                                                    std::size_t number,
                                                    std::optional<InstanceId> exclude) const {
  if (number == 0) throw ArgumentError("number must be at least 1");
  const auto q = embedder_->embed(text);
  std::vector<SimilarInstance> all;
  const auto& instances = dataset_->instances();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (exclude && instances[i].id == *exclude) continue;
    all.push_back({instances[i].id, std::clamp(cosine(q, vectors_[i]), -1.0, 1.0)});
  }
  const auto cut = std::min(number, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut), all.end(),
                    [](const SimilarInstance& a, const SimilarInstance& b) {
                      if (a.cosine != b.cosine) return a.cosine > b.cosine;
                      return a.id < b.id;
                    });
  all.resize(cut);
  return all;
}

std::vector<SimilarInstance> SimilarityIndex::similar_to(InstanceId id,
                                                         std::size_t number) const {
  return query(dataset_->at(id).text(), number, id);
}

const SparseVector& SimilarityIndex::vector_of(InstanceId id) const {
  const auto& instances = dataset_->instances();
  auto it = std::lower_bound(instances.begin(), instances.end(), id,
                             [](const Instance& inst, InstanceId v) { return inst.id < v; });
  if (it == instances.end() || it->id != id) {
    throw ArgumentError("there is no instance with id " + std::to_string(id));
  }
  return vectors_[static_cast<std::size_t>(it - instances.begin())];
}

std::vector<KeywordCount> keywords(const Dataset& dataset, const Selection& sel,
                                   std::size_t n) {
  if (n == 0) throw ArgumentError("n must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (auto id : sel.ids) {
    const auto tt = tokenize(dataset.at(id).text());
    for (std::size_t i = 0; i < tt.size(); ++i) {
      if (tt.is_separator(i) || is_stopword(tt.tokens[i])) continue;
      ++counts[tt.tokens[i]];
    }
  }
  std::vector<KeywordCount> out;
  for (const auto& [token, count] : counts) out.push_back({token, count});
  std::stable_sort(out.begin(), out.end(), [](const KeywordCount& a, const KeywordCount& b) {
    return a.count > b.count;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace modeltalk
