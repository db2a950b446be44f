#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace modeltalk {

// Clause operations of the query language. Connectives are not clauses.
enum class OpName {
  filter,
  includes,
  custominput,
  predict,
  likelihood,
  mistakes,
  score,
  show,
  countdata,
  label,
  data,
  model,
  function,
  self,
  nlpattribute,
  globaltopk,
  nlpcfe,
  adversarial,
  augment,
  rationalize,
  keywords,
  similar,
};

inline constexpr std::size_t kClauseOpCount = 22;

std::string_view to_string(OpName op);
std::optional<OpName> parse_op_name(std::string_view name);

enum class OpCategory {
  filter,
  prediction,
  data,
  meta,
  about,
  attribution,
  perturbation,
  rationalization,
  nlu,
  logic,
};

std::string_view to_string(OpCategory category);

enum class Connective { and_, or_ };

std::string_view to_string(Connective c);

struct QuotedString {
  std::string value;
  bool operator==(const QuotedString&) const = default;
};

struct Keyword {
  std::string value;
  bool operator==(const Keyword&) const = default;
};

using Arg = std::variant<std::int64_t, QuotedString, Keyword>;

struct Clause {
  OpName op = OpName::show;
  std::vector<Arg> args;

  bool operator==(const Clause&) const = default;
};

struct ParseTree {
  std::vector<Clause> clauses;
  // connectives[i] joins clauses[i] and clauses[i + 1].
  std::vector<Connective> connectives;

  bool operator==(const ParseTree&) const = default;

  // The trailing non-filter clause, if any.
  const Clause* action() const;
  bool has_filter_id() const;
  std::optional<std::int64_t> filter_id() const;
  bool has_custom_input() const;
};

// Shape of one argument position in a clause.
struct ArgElement {
  enum class Shape {
    integer,        // <int>
    quoted,         // "<text>"
    keyword_int,    // <keyword> <int>
    keyword_quoted, // <keyword> "<text>"
    choice,         // one of several keywords, some followed by an <int>
    flag,           // bare keyword, present or absent
  };
  struct Option {
    std::string keyword;
    bool takes_int = false;
    std::int64_t default_int = 0;
  };

  Shape shape = Shape::integer;
  // One of the seven slot types, or empty for a purely syntactic argument.
  std::string slot;
  std::string keyword;
  std::vector<Option> options;
  bool required = false;
  // Integer default, or index into options for a choice.
  std::optional<std::int64_t> default_value;
  std::int64_t min_value = 0;
};

struct SlotSpec {
  std::string name;
  // Rendered default; empty when the slot has none.
  std::string default_value;
};

struct OperationSignature {
  std::string name;
  OpCategory category = OpCategory::data;
  std::vector<SlotSpec> required_slots;
  std::vector<SlotSpec> optional_slots;
  bool supports_custom_input = false;
  // Must be preceded by `filter id` or `custominput`.
  bool requires_instance = false;
  std::vector<ArgElement> args;
  std::string description;

  bool is_filter() const { return category == OpCategory::filter; }
  bool is_connective() const { return category == OpCategory::logic; }
};

// All 24 registered operations: 22 clause operations plus `and` / `or`.
const std::vector<OperationSignature>& registry();
const OperationSignature& signature(OpName op);
const OperationSignature* find_signature(std::string_view name);

// Throws GrammarError with the offending token position.
ParseTree parse_string(std::string_view text);
std::string canonicalize(const ParseTree& tree);
// parse + canonicalize in one step.
std::string canonical_form(std::string_view text);

// Checks the clause-level invariants of an already built tree.
void validate(const ParseTree& tree);

std::string render_arg(const Arg& arg);

}  // namespace modeltalk
