#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modeltalk/data.hpp"
#include "modeltalk/model.hpp"
#include "modeltalk/sparse.hpp"
#include "modeltalk/text.hpp"
#include "modeltalk/tfidf.hpp"

namespace modeltalk {

// ---------------------------------------------------------------------------
// Lexicon

// word -> substitutes, closest first. Antonyms are kept apart and only feed
// the counterfactual search.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;
  SynonymLexicon(std::map<std::string, std::vector<std::string>> synonyms,
                 std::map<std::string, std::vector<std::string>> antonyms = {});

  // Lines "word<TAB>sub1,sub2,...". Self mappings, duplicates and
  // multi-token substitutes are dropped.
  static SynonymLexicon load(const std::filesystem::path& synonyms,
                             const std::optional<std::filesystem::path>& antonyms = {});
  void merge(const SynonymLexicon& other);

  const std::vector<std::string>& synonyms(std::string_view word) const;
  const std::vector<std::string>& antonyms(std::string_view word) const;
  std::size_t size() const { return synonyms_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> synonyms_;
  std::map<std::string, std::vector<std::string>, std::less<>> antonyms_;
};

// ---------------------------------------------------------------------------
// Attribution

// Integrated Gradients from `baseline` to `input` with `steps` midpoint
// samples of the gradient along the straight line. `gradient(point)` returns
// the gradient at a point as a sparse vector.
template <typename GradientFn>
SparseVector integrated_gradients(const SparseVector& input, const SparseVector& baseline,
                                  std::size_t steps, GradientFn&& gradient) {
  std::map<std::size_t, double> start, delta;
  for (const auto& [f, v] : baseline) start[f] = v;
  for (const auto& [f, v] : input) delta[f] = v;
  for (const auto& [f, v] : baseline) delta[f] -= v;

  std::map<std::size_t, double> accumulated;
  for (std::size_t k = 0; k < steps; ++k) {
    const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
    SparseVector point;
    for (const auto& [f, d] : delta) {
      auto it = start.find(f);
      point.emplace_back(f, (it == start.end() ? 0.0 : it->second) + alpha * d);
    }
    for (const auto& [f, g] : gradient(point)) accumulated[f] += g;
  }
  SparseVector out;
  for (const auto& [f, d] : delta) {
    auto it = accumulated.find(f);
    const double mean = it == accumulated.end() ? 0.0 : it->second / static_cast<double>(steps);
    out.emplace_back(f, d * mean);
  }
  return out;
}

enum class AttributionLevel { token, sentence };

struct AttributionOptions {
  // nullopt means "all".
  std::optional<std::size_t> topk = 3;
  AttributionLevel level = AttributionLevel::token;
  std::size_t ig_steps = 32;
};

struct Attribution {
  std::optional<InstanceId> instance;  // nullopt for custom input
  std::size_t target_class = 0;
  AttributionLevel level = AttributionLevel::token;
  std::vector<std::string> tokens;
  std::vector<double> token_scores;
  // Sentence index of each token.
  std::vector<std::size_t> token_sentence;
  std::vector<double> sentence_scores;
  // Indices into tokens (token level) or sentences, highest score first;
  // every index for mode "all".
  std::vector<std::size_t> top;

  double total() const;
};

// Throws ArgumentError("nothing to attribute") for text without tokens.
Attribution nlpattribute(const LinearTextModel& model, std::string_view text,
                         std::size_t target_class, const AttributionOptions& options = {});

struct GlobalAttribution {
  std::string token;
  double mean = 0.0;
  std::size_t occurrences = 0;
};

// Mean per-occurrence attribution toward `target_class` over the dataset,
// tokens seen fewer than `min_occurrence` times excluded; descending, ties
// by token.
std::vector<GlobalAttribution> globaltopk(const LinearTextModel& model,
                                          const Dataset& dataset, std::size_t k,
                                          std::size_t target_class,
                                          std::size_t min_occurrence = 2);

// Sentences describing where the most salient token sits and how its local
// salience compares to the dataset-wide ranking.
std::vector<std::string> verbalize_attribution(const Attribution& attribution,
                                               const std::vector<GlobalAttribution>& global);

// ---------------------------------------------------------------------------
// Perturbation

enum class EditKind { substitute, remove };

struct Edit {
  std::size_t position = 0;  // token index
  EditKind kind = EditKind::remove;
  std::string word;  // substitute only

  bool operator==(const Edit&) const = default;
};

struct EditedText {
  std::vector<std::string> original_tokens;
  std::vector<Edit> edits;  // ascending position
  std::string text;
  // `text` with substituted words wrapped in **...**; literal '*' and
  // backslashes are backslash-escaped.
  std::string marked_text;
  Prediction prediction;
  std::vector<double> probabilities;
};

// Rebuilds the text with edits applied at the token spans of `source`.
EditedText apply_edits(const LinearTextModel& model, std::string_view text,
                       const TokenizedText& source, std::vector<Edit> edits);

struct CounterfactualOptions {
  std::size_t number = 1;
  std::size_t max_edits = 3;
  // Positions considered beyond the first edit, ranked by attribution.
  std::size_t deep_positions = 12;
  std::size_t max_evaluations = 400000;
};

struct CounterfactualResult {
  Prediction original;
  // Empty means no flip was found within the edit budget.
  std::vector<EditedText> results;
};

CounterfactualResult nlpcfe(const LinearTextModel& model, const SynonymLexicon& lexicon,
                            std::string_view text, const CounterfactualOptions& options = {});

struct AdversarialResult {
  enum class Status { success, failed, already_misclassified };
  Status status = Status::failed;
  Prediction original;
  std::size_t gold_label = 0;
  std::optional<EditedText> example;
  std::size_t substitutions_tried = 0;
};

// PWWS against the gold label.
AdversarialResult adversarial(const LinearTextModel& model, const SynonymLexicon& lexicon,
                              const Instance& instance);
AdversarialResult adversarial(const LinearTextModel& model, const SynonymLexicon& lexicon,
                              std::string_view text, std::size_t gold_label);

inline constexpr double kAugmentRatio = 0.3;

struct AugmentResult {
  std::size_t eligible = 0;
  Prediction original;
  // nullopt when there is nothing eligible to replace.
  std::optional<EditedText> edited;
};

AugmentResult augment(const LinearTextModel& model, const SynonymLexicon& lexicon,
                      std::string_view text, std::uint64_t seed,
                      double ratio = kAugmentRatio);

// Tokens augment may touch: not a separator, not a stopword, has synonyms.
std::vector<std::size_t> augment_eligible(const TokenizedText& text,
                                          const SynonymLexicon& lexicon);
std::size_t augment_count(std::size_t eligible, double ratio = kAugmentRatio);

// ---------------------------------------------------------------------------
// Similarity and keywords

struct SimilarInstance {
  InstanceId id = 0;
  double cosine = 0.0;
};

class SimilarityIndex {
 public:
  // Fits TF-IDF on the dataset when no embedder is given.
  explicit SimilarityIndex(const Dataset& dataset,
                           std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

  // Descending cosine, ties by ascending id; `exclude` never returned.
  std::vector<SimilarInstance> query(std::string_view text, std::size_t number,
                                     std::optional<InstanceId> exclude = std::nullopt) const;
  std::vector<SimilarInstance> similar_to(InstanceId id, std::size_t number) const;

  const EmbeddingProvider& embedder() const { return *embedder_; }
  const SparseVector& vector_of(InstanceId id) const;

 private:
  const Dataset* dataset_;
  std::shared_ptr<const EmbeddingProvider> embedder_;
  std::vector<SparseVector> vectors_;  // aligned with dataset instances
};

struct KeywordCount {
  std::string token;
  std::size_t count = 0;
};

// Stopword-filtered token frequencies, top n, ties by token.
std::vector<KeywordCount> keywords(const Dataset& dataset, const Selection& sel,
                                   std::size_t n);

// ---------------------------------------------------------------------------
// Rationales

class RationaleBackend {
 public:
  virtual ~RationaleBackend() = default;
  // nullopt when the backend is unreachable or times out.
  virtual std::optional<std::string> complete(const std::string& prompt) = 0;
};

// POST {prompt} -> {completion}.
class HttpRationaleBackend : public RationaleBackend {
 public:
  explicit HttpRationaleBackend(std::string url,
                                std::chrono::milliseconds timeout = std::chrono::seconds(10));
  std::optional<std::string> complete(const std::string& prompt) override;

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

struct Rationale {
  std::string text;
  bool fallback = false;  // external backend configured but failed
  bool external = false;
  std::vector<std::string> cited_tokens;
};

// Input text, predicted label and an instruction, concatenated.
std::string rationale_prompt(std::string_view text, std::string_view label);

Rationale rationalize(std::string_view text, const Prediction& prediction,
                      const Attribution& attribution, RationaleBackend* backend = nullptr,
                      std::uint64_t seed = 0);

}  // namespace modeltalk
