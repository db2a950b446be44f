#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace modeltalk {

// Every kind of result a turn can produce. Each one has a template file
// <name>.txt in the template directory.
enum class ResultType {
  show,
  empty_selection,
  countdata,
  label,
  predict,
  predict_distribution,
  likelihood,
  mistakes_count,
  mistakes_sample,
  no_mistakes,
  score,
  data,
  model,
  function,
  self,
  nlpattribute,
  nlpattribute_sentence,
  globaltopk,
  globaltopk_none,
  nlpcfe,
  nlpcfe_none,
  adversarial,
  adversarial_failed,
  adversarial_misclassified,
  augment,
  augment_none,
  rationalize,
  keywords,
  similar,
  similar_none,
  greeting,
  acknowledgment,
  farewell,
  clarify_intent,
  clarify_id,
  clarify_slot,
  clarify_invalid,
  clarify_abandon,
  unsupported_custom_input,
  unrecognized,
  error,
};

std::string_view to_string(ResultType type);
std::optional<ResultType> parse_result_type(std::string_view name);
const std::vector<ResultType>& all_result_types();
// Placeholders a template of this type may use.
const std::vector<std::string>& placeholders_of(ResultType type);

// A typed, JSON-serializable operation outcome. The payload also carries
// "type" so cached payloads are self-describing.
struct OperationResult {
  ResultType type = ResultType::error;
  nlohmann::json payload = nlohmann::json::object();
};

OperationResult make_result(ResultType type, nlohmann::json payload = nlohmann::json::object());

struct TurnResponse {
  std::string text;
  nlohmann::json payload = nlohmann::json::object();
  std::string parse;  // canonical parse executed, empty when none
  bool fallback_used = false;
  bool clarification = false;
  bool no_result = false;

  nlohmann::json to_json() const;
};

class TemplateRegistry {
 public:
  TemplateRegistry() = default;

  // Reads <dir>/<type>.txt for every result type; one variant per non-empty
  // line, '#' comment lines skipped. Throws LoadError on a missing file or an
  // unknown placeholder.
  static TemplateRegistry load(const std::filesystem::path& dir);

  // Throws LoadError when a variant uses a placeholder the type does not
  // provide, the pool is empty, or an about-type gets more than one variant.
  void add(ResultType type, std::vector<std::string> variants);

  const std::vector<std::string>& variants(ResultType type) const;
  bool complete() const;

 private:
  std::map<ResultType, std::vector<std::string>> templates_;
};

// "{name}" substitution; unknown names are left as-is.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values);

// 0.75 -> "75.00%".
std::string format_percent(double fraction);
// Backslash-escapes '*' so dataset text cannot unbalance bold markers.
std::string escape_markup(std::string_view text);
// '**' markers pair up, ignoring backslash-escaped characters.
bool bold_balanced(std::string_view text);

class Responder {
 public:
  explicit Responder(TemplateRegistry templates);

  // Throws std::logic_error when the registry lacks the type.
  TurnResponse render(const OperationResult& result, std::uint64_t seed) const;
  // kind is ResultType::function or ResultType::self.
  TurnResponse render_about(ResultType kind) const;

  const TemplateRegistry& templates() const { return templates_; }

 private:
  TemplateRegistry templates_;
};

}  // namespace modeltalk
