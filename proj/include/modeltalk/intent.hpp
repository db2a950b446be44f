#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "modeltalk/data.hpp"
#include "modeltalk/tfidf.hpp"

namespace modeltalk {

struct PromptEntry {
  // May contain {slot} placeholders.
  std::string utterance;
  // Parse with {slot} placeholders and optional [ ... ] segments.
  std::string parse_template;
  // Op name of the final clause.
  std::string intent;
};

// Nearest-neighbour intent retrieval index.
class PromptBank {
 public:
  // Throws LoadError when a template does not canonicalize after dummy slot
  // substitution.
  explicit PromptBank(std::vector<PromptEntry> entries);

  // TSV lines "utterance<TAB>parse"; '#' starts a comment line.
  static PromptBank load(const std::filesystem::path& path);

  const std::vector<PromptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const TfidfVectorizer& vectorizer() const { return vectorizer_; }
  // Normalized entry embeddings, aligned with entries().
  const std::vector<SparseVector>& embeddings() const { return embeddings_; }

  SparseVector embed(std::string_view text) const;

 private:
  std::vector<PromptEntry> entries_;
  TfidfVectorizer vectorizer_;
  std::vector<SparseVector> embeddings_;
};

// Replaces {slot} placeholders with the field separator so they neither
// become vocabulary terms nor form bigrams.
std::string strip_placeholders(std::string_view text);

// Fills every {slot} of a template with a fixed dummy value and keeps all
// optional segments; used to validate templates.
std::string fill_with_dummies(std::string_view text);

// Dummy id used for bank instantiation. Evaluation runs with this id as the
// previously discussed instance, so deictic entries resolve to it too.
inline constexpr std::int64_t kDummyId = 42;

struct InstantiatedEntry {
  std::string utterance;
  std::string parse;  // canonical
};

// Concrete (utterance, parse) pair for a bank entry: placeholders in the
// utterance get dummy values, placeholders absent from it get the operation
// defaults, and optional segments survive only when the utterance fills them.
InstantiatedEntry instantiate_entry(const PromptEntry& entry, const Dataset* dataset);

struct IntentCandidate {
  std::string intent;
  double score = 0.0;
  std::size_t entry = 0;
};

// Top-k entries by cosine; ties keep bank order.
std::vector<IntentCandidate> rank_intents(std::string_view utterance,
                                          const PromptBank& bank,
                                          std::size_t k = 5);

struct SlotMap {
  std::optional<std::int64_t> id;
  std::optional<std::int64_t> number;
  std::optional<std::string> class_names;
  std::optional<SplitTag> data_type;
  std::optional<std::string> metric;
  std::optional<std::string> include_token;
  bool sentence_level = false;

  bool operator==(const SlotMap&) const = default;
};

struct SlotIssue {
  std::string slot;
  std::string message;
};

struct SlotTagging {
  SlotMap slots;
  std::vector<SlotIssue> issues;
};

// Rule-based tagger for the seven slot types. `dataset` may be null, in
// which case ids are not range-checked and class names are not matched.
SlotTagging tag_slots(std::string_view utterance, std::string_view intent,
                      const Dataset* dataset);

// The instance a conversation last talked about.
struct InstanceRef {
  enum class Kind { dataset, custom };
  Kind kind = Kind::dataset;
  std::int64_t id = 0;

  static InstanceRef custom() { return {Kind::custom, 0}; }
  static InstanceRef of(std::int64_t id) { return {Kind::dataset, id}; }
  bool operator==(const InstanceRef&) const = default;
};

struct ReferenceContext {
  std::optional<InstanceRef> previous;
  // The utterance referred back with "it", "this sample", ...
  bool deictic = false;
  // A custom input is the current subject and the utterance does not ask
  // about the whole dataset.
  bool custom_subject = false;
};

struct MissingSlot {
  std::string slot;
  std::string intent;
  std::string parse_template;
  SlotMap slots;
  // Set when the slot was present but invalid ("no instance with id 999").
  std::string reason;
};

struct UnsupportedCustomInput {
  std::string intent;
};

using ComposeResult = std::variant<std::string, MissingSlot, UnsupportedCustomInput>;

// Default parse template for an intent.
std::string default_template(std::string_view intent);

ComposeResult compose_parse(std::string_view parse_template, const SlotMap& slots,
                            const ReferenceContext& context);
ComposeResult compose_parse_for_intent(std::string_view intent, const SlotMap& slots,
                                       const ReferenceContext& context);

enum class SmalltalkKind { greeting, acknowledgment, farewell };

std::string_view to_string(SmalltalkKind kind);
// Closed lexicons; a greeting or acknowledgment must make up the whole
// utterance, a farewell cue anywhere ends the conversation.
std::optional<SmalltalkKind> detect_smalltalk(std::string_view utterance);

// "it", "this", "this sample", "this instance", "that one".
bool has_deictic_reference(std::string_view utterance);

// "dataset", "overall", "distribution", ...
bool mentions_dataset_scope(std::string_view utterance);

struct Parsed {
  std::string parse;
  IntentCandidate intent;
};

struct Ambiguous {
  std::vector<IntentCandidate> candidates;
  std::string utterance;
};

struct Smalltalk {
  SmalltalkKind kind;
};

struct Unrecognized {};

using ParseResult = std::variant<Parsed, Ambiguous, MissingSlot, Smalltalk,
                                 UnsupportedCustomInput, Unrecognized>;

struct IntentConfig {
  // Absolute cosine gap under which two different intents are ambiguous.
  double ambiguity_epsilon = 0.05;
  std::size_t top_k = 5;
};

// Hook for a parser behind an HTTP endpoint. Returns nullopt on failure so
// the built-in parser can take over.
class ExternalParser {
 public:
  virtual ~ExternalParser() = default;
  virtual std::optional<std::string> parse(std::string_view utterance,
                                           std::string_view context_id) = 0;
};

// POST {utterance, context_id} -> {parse}.
class HttpExternalParser : public ExternalParser {
 public:
  explicit HttpExternalParser(std::string url,
                              std::chrono::milliseconds timeout = std::chrono::seconds(10));
  std::optional<std::string> parse(std::string_view utterance,
                                   std::string_view context_id) override;

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

class IntentParser {
 public:
  IntentParser(const PromptBank& bank, const Dataset* dataset, IntentConfig config = {})
      : bank_(&bank), dataset_(dataset), config_(config) {}

  ParseResult parse(std::string_view utterance,
                    const std::optional<InstanceRef>& previous) const;

  // Finishes a parse once the intent is settled (clarification answers).
  ParseResult compose_from_entry(std::size_t entry, std::string_view utterance,
                                 const std::optional<InstanceRef>& previous) const;

  const PromptBank& bank() const { return *bank_; }
  const IntentConfig& config() const { return config_; }

 private:
  const PromptBank* bank_;
  const Dataset* dataset_;
  IntentConfig config_;
};

// Free-function form.
ParseResult parse_utterance(std::string_view utterance, const PromptBank& bank,
                            const Dataset* dataset,
                            const std::optional<InstanceRef>& previous,
                            const IntentConfig& config = {});

}  // namespace modeltalk
