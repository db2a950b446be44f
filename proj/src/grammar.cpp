#include "modeltalk/grammar.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>

#include "modeltalk/errors.hpp"
#include "modeltalk/text.hpp"

namespace modeltalk {

namespace {

constexpr std::array<std::string_view, kClauseOpCount> kOpNames = {
    "filter",      "includes",   "custominput", "predict",    "likelihood",
    "mistakes",    "score",      "show",        "countdata",  "label",
    "data",        "model",      "function",    "self",       "nlpattribute",
    "globaltopk",  "nlpcfe",     "adversarial", "augment",    "rationalize",
    "keywords",    "similar"};

using Shape = ArgElement::Shape;

ArgElement integer(std::string slot, std::optional<std::int64_t> def,
                   std::int64_t min_value = 1) {
  ArgElement e;
  e.shape = Shape::integer;
  e.slot = std::move(slot);
  e.default_value = def;
  e.min_value = min_value;
  return e;
}

ArgElement choice(std::string slot, std::vector<ArgElement::Option> options,
                  std::optional<std::int64_t> def, bool required = false) {
  ArgElement e;
  e.shape = Shape::choice;
  e.slot = std::move(slot);
  e.options = std::move(options);
  e.default_value = def;
  e.required = required;
  e.min_value = 1;
  return e;
}

std::vector<OperationSignature> build_registry() {
  std::vector<OperationSignature> r;
  auto add = [&](std::string name, OpCategory cat, std::string description) {
    OperationSignature s;
    s.name = std::move(name);
    s.category = cat;
    s.description = std::move(description);
    r.push_back(std::move(s));
    return &r.back();
  };

  {
    auto* s = add("filter", OpCategory::filter, "access a single instance by its id");
    ArgElement e;
    e.shape = Shape::keyword_int;
    e.keyword = "id";
    e.slot = "id";
    e.required = true;
    e.min_value = 0;
    s->args = {e};
    s->required_slots = {{"id", ""}};
  }
  {
    auto* s = add("includes", OpCategory::filter, "filter instances by token occurrence");
    ArgElement e;
    e.shape = Shape::quoted;
    e.slot = "include_token";
    e.required = true;
    s->args = {e};
    s->required_slots = {{"include_token", ""}};
  }
  {
    auto* s = add("custominput", OpCategory::filter,
                  "bind the action to the user's custom input text");
    s->supports_custom_input = true;
  }
  {
    auto* s = add("predict", OpCategory::prediction,
                  "prediction for an instance or prediction distribution of a selection");
    s->supports_custom_input = true;
    s->optional_slots = {{"id", ""}};
  }
  {
    auto* s = add("likelihood", OpCategory::prediction,
                  "class probabilities of an instance");
    s->requires_instance = true;
    s->required_slots = {{"id", ""}};
  }
  {
    auto* s = add("mistakes", OpCategory::prediction,
                  "count or sample wrongly predicted instances");
    s->args = {choice("", {{"count", false, 0}, {"sample", true, 3}}, 0)};
  }
  {
    auto* s = add("score", OpCategory::prediction,
                  "relation between predictions and labels under a metric");
    s->args = {choice("metric",
                      {{"accuracy", false, 0},
                       {"precision", false, 0},
                       {"recall", false, 0},
                       {"f1", false, 0}},
                      std::nullopt, true)};
    s->required_slots = {{"metric", "accuracy"}};
  }
  {
    auto* s = add("show", OpCategory::data, "showcase a list of instances");
    s->required_slots = {{"id", ""}};
  }
  add("countdata", OpCategory::data, "count the instances in a selection");
  add("label", OpCategory::data, "label distribution of a selection");
  {
    auto* s = add("data", OpCategory::meta, "information about the data (datasheet)");
    s->args = {choice("data_type",
                      {{"train", false, 0}, {"dev", false, 0}, {"test", false, 0}},
                      std::nullopt)};
    s->optional_slots = {{"data_type", ""}};
  }
  add("model", OpCategory::meta, "metadata of the model (model card)");
  add("function", OpCategory::about, "what the system can do");
  add("self", OpCategory::about, "self-introduction");
  {
    auto* s = add("nlpattribute", OpCategory::attribution,
                  "feature importances of an instance at token or sentence level");
    s->supports_custom_input = true;
    s->requires_instance = true;
    ArgElement flag;
    flag.shape = Shape::flag;
    flag.keyword = "sentence";
    flag.slot = "sentence_level";
    s->args = {choice("number", {{"topk", true, 3}, {"all", false, 0}}, 0), flag};
    s->required_slots = {{"id", ""}};
    s->optional_slots = {{"number", "3"}, {"sentence_level", ""}};
  }
  {
    auto* s = add("globaltopk", OpCategory::attribution,
                  "top k most attributed tokens across the dataset");
    ArgElement cls;
    cls.shape = Shape::keyword_quoted;
    cls.keyword = "class";
    cls.slot = "class_names";
    s->args = {integer("number", 3), cls};
    s->optional_slots = {{"number", "3"}, {"class_names", ""}};
  }
  {
    auto* s = add("nlpcfe", OpCategory::perturbation,
                  "counterfactual edits that flip the prediction");
    s->requires_instance = true;
    s->args = {integer("number", 1)};
    s->required_slots = {{"id", ""}};
    s->optional_slots = {{"number", "1"}};
  }
  {
    auto* s = add("adversarial", OpCategory::perturbation,
                  "adversarial word substitutions that cause a wrong prediction");
    s->requires_instance = true;
    s->required_slots = {{"id", ""}};
  }
  {
    auto* s = add("augment", OpCategory::perturbation,
                  "generate a similar instance by replacing words");
    s->requires_instance = true;
    s->required_slots = {{"id", ""}};
  }
  {
    auto* s = add("rationalize", OpCategory::rationalization,
                  "explain a prediction in natural language");
    s->requires_instance = true;
    s->required_slots = {{"id", ""}};
  }
  {
    auto* s = add("keywords", OpCategory::nlu, "most frequent keywords");
    s->args = {integer("number", 5)};
    s->optional_slots = {{"number", "5"}};
  }
  {
    auto* s = add("similar", OpCategory::nlu,
                  "instances most similar to the current one");
    s->supports_custom_input = true;
    s->requires_instance = true;
    s->args = {integer("number", 1)};
    s->required_slots = {{"id", ""}};
    s->optional_slots = {{"number", "1"}};
  }
  add("and", OpCategory::logic, "concatenation of operations");
  add("or", OpCategory::logic, "selection of multiple filters");
  return r;
}

struct Token {
  std::string text;
  bool quoted = false;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  while (i < s.size()) {
    if (is_space(s[i])) {
      ++i;
      continue;
    }
    if (s[i] == '"') {
      std::string value;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < s.size()) {
        if (s[j] == '\\' && j + 1 < s.size()) {
          value += s[j + 1];
          j += 2;
        } else if (s[j] == '"') {
          closed = true;
          ++j;
          break;
        } else {
          value += s[j++];
        }
      }
      if (!closed) throw GrammarError("unterminated quoted string", tokens.size());
      if (j < s.size() && !is_space(s[j])) {
        throw GrammarError("quoted string must be followed by whitespace",
                           tokens.size());
      }
      tokens.push_back({std::move(value), true});
      i = j;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    tokens.push_back({std::string(s.substr(i, j - i)), false});
    i = j;
  }
  return tokens;
}

std::optional<std::int64_t> as_integer(const Token& t) {
  if (t.quoted || t.text.empty() || t.text.size() > 18) return std::nullopt;
  if (!std::all_of(t.text.begin(), t.text.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoll(t.text);
}

bool is_keyword(const Token& t, std::string_view kw) {
  return !t.quoted && to_lower(t.text) == kw;
}

bool is_connective(const Token& t) {
  return is_keyword(t, "and") || is_keyword(t, "or");
}

// Matches the argument tokens [begin, end) against the signature and returns
// the normalized (defaults filled) argument list.
std::vector<Arg> parse_args(const OperationSignature& sig,
                            const std::vector<Token>& tokens, std::size_t begin,
                            std::size_t end) {
  std::vector<Arg> args;
  std::size_t pos = begin;
  auto check_min = [&](std::int64_t v, const ArgElement& e, std::size_t at) {
    if (v < e.min_value) {
      throw GrammarError(fmt::format("{} expects an integer >= {}", sig.name,
                                     e.min_value),
                         at);
    }
  };

  for (const auto& e : sig.args) {
    const bool available = pos < end;
    switch (e.shape) {
      case Shape::integer: {
        std::optional<std::int64_t> v;
        if (available) v = as_integer(tokens[pos]);
        if (v) {
          check_min(*v, e, pos);
          args.emplace_back(*v);
          ++pos;
        } else if (e.default_value) {
          args.emplace_back(*e.default_value);
        } else if (e.required) {
          throw GrammarError(sig.name + " expects an integer", pos);
        }
        break;
      }
      case Shape::quoted: {
        if (available && tokens[pos].quoted) {
          if (trim(tokens[pos].text).empty()) {
            throw GrammarError(sig.name + " expects a non-empty string", pos);
          }
          args.emplace_back(QuotedString{tokens[pos].text});
          ++pos;
        } else if (e.required) {
          throw GrammarError(sig.name + " expects a quoted string", pos);
        }
        break;
      }
      case Shape::keyword_int: {
        if (available && is_keyword(tokens[pos], e.keyword)) {
          if (pos + 1 >= end) {
            throw GrammarError(e.keyword + " expects an integer", pos + 1);
          }
          auto v = as_integer(tokens[pos + 1]);
          if (!v) throw GrammarError(e.keyword + " expects an integer", pos + 1);
          check_min(*v, e, pos + 1);
          args.emplace_back(Keyword{e.keyword});
          args.emplace_back(*v);
          pos += 2;
        } else if (e.required) {
          throw GrammarError(fmt::format("{} expects '{} <int>'", sig.name, e.keyword),
                             pos);
        }
        break;
      }
      case Shape::keyword_quoted: {
        if (available && is_keyword(tokens[pos], e.keyword)) {
          if (pos + 1 >= end || !tokens[pos + 1].quoted ||
              trim(tokens[pos + 1].text).empty()) {
            throw GrammarError(e.keyword + " expects a quoted string", pos + 1);
          }
          args.emplace_back(Keyword{e.keyword});
          args.emplace_back(QuotedString{tokens[pos + 1].text});
          pos += 2;
        } else if (e.required) {
          throw GrammarError(sig.name + " expects '" + e.keyword + " \"...\"'", pos);
        }
        break;
      }
      case Shape::choice: {
        const ArgElement::Option* picked = nullptr;
        if (available && !tokens[pos].quoted) {
          auto word = to_lower(tokens[pos].text);
          for (const auto& opt : e.options) {
            if (opt.keyword == word) picked = &opt;
          }
        }
        if (picked) {
          ++pos;
          args.emplace_back(Keyword{picked->keyword});
          if (picked->takes_int) {
            std::optional<std::int64_t> v;
            if (pos < end) v = as_integer(tokens[pos]);
            if (v) {
              check_min(*v, e, pos);
              args.emplace_back(*v);
              ++pos;
            } else {
              args.emplace_back(picked->default_int);
            }
          }
        } else if (e.default_value) {
          const auto& opt = e.options[static_cast<std::size_t>(*e.default_value)];
          args.emplace_back(Keyword{opt.keyword});
          if (opt.takes_int) args.emplace_back(opt.default_int);
        } else if (e.required) {
          std::vector<std::string> names;
          for (const auto& opt : e.options) names.push_back(opt.keyword);
          throw GrammarError(
              fmt::format("{} expects one of: {}", sig.name, join(names, ", ")), pos);
        }
        break;
      }
      case Shape::flag: {
        if (available && is_keyword(tokens[pos], e.keyword)) {
          args.emplace_back(Keyword{e.keyword});
          ++pos;
        }
        break;
      }
    }
  }
  if (pos < end) {
    throw GrammarError(fmt::format("unexpected argument '{}' for {}",
                                   tokens[pos].text, sig.name),
                       pos);
  }
  return args;
}

void check_structure(const ParseTree& tree,
                     const std::vector<std::size_t>& clause_pos) {
  auto where = [&](std::size_t i) {
    return i < clause_pos.size() ? clause_pos[i] : 0;
  };
  if (tree.clauses.empty()) throw GrammarError("empty parse", 0);
  if (tree.connectives.size() + 1 != tree.clauses.size()) {
    throw GrammarError("connective count does not match clauses", 0);
  }
  for (std::size_t i = 0; i < tree.clauses.size(); ++i) {
    const auto& sig = signature(tree.clauses[i].op);
    if (!sig.is_filter() && i + 1 != tree.clauses.size()) {
      throw GrammarError("action clause must be last", where(i));
    }
  }
  for (std::size_t i = 0; i < tree.connectives.size(); ++i) {
    if (tree.connectives[i] != Connective::or_) continue;
    if (!signature(tree.clauses[i].op).is_filter() ||
        !signature(tree.clauses[i + 1].op).is_filter()) {
      throw GrammarError("'or' may only join filter clauses",
                         where(i + 1) == 0 ? 0 : where(i + 1) - 1);
    }
  }

  std::size_t custom = 0;
  bool has_id = false, has_or = false;
  for (const auto& c : tree.clauses) {
    if (c.op == OpName::custominput) ++custom;
    if (c.op == OpName::filter) has_id = true;
  }
  for (auto c : tree.connectives) has_or = has_or || c == Connective::or_;
  std::size_t filters = 0;
  for (const auto& c : tree.clauses) filters += signature(c.op).is_filter();
  if (custom > 0 && filters > 1) {
    auto it = std::find_if(tree.clauses.begin(), tree.clauses.end(),
                           [](const Clause& c) { return c.op == OpName::custominput; });
    throw GrammarError("custominput cannot be combined with other filters",
                       where(static_cast<std::size_t>(it - tree.clauses.begin())));
  }

  const auto& last = tree.clauses.back();
  const auto& last_sig = signature(last.op);
  if (last_sig.is_filter()) return;
  const std::size_t last_pos = where(tree.clauses.size() - 1);
  if (custom > 0 && !last_sig.supports_custom_input) {
    throw GrammarError(last_sig.name + " does not support custom input", last_pos);
  }
  if (last_sig.requires_instance && (custom == 0 && (!has_id || has_or))) {
    throw GrammarError(last_sig.name + " needs a single instance ('filter id <n>')",
                       last_pos);
  }
}

}  // namespace

std::string_view to_string(OpName op) {
  return kOpNames[static_cast<std::size_t>(op)];
}

std::optional<OpName> parse_op_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpName>(i);
  }
  return std::nullopt;
}

std::string_view to_string(OpCategory category) {
  switch (category) {
    case OpCategory::filter: return "filter";
    case OpCategory::prediction: return "prediction";
    case OpCategory::data: return "data";
    case OpCategory::meta: return "meta";
    case OpCategory::about: return "about";
    case OpCategory::attribution: return "attribution";
    case OpCategory::perturbation: return "perturbation";
    case OpCategory::rationalization: return "rationalization";
    case OpCategory::nlu: return "nlu";
    case OpCategory::logic: return "logic";
  }
  return "logic";
}

std::string_view to_string(Connective c) {
  return c == Connective::and_ ? "and" : "or";
}

const std::vector<OperationSignature>& registry() {
  static const std::vector<OperationSignature> r = build_registry();
  return r;
}

const OperationSignature& signature(OpName op) {
  return registry()[static_cast<std::size_t>(op)];
}

const OperationSignature* find_signature(std::string_view name) {
  for (const auto& s : registry()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Clause* ParseTree::action() const {
  if (clauses.empty() || signature(clauses.back().op).is_filter()) return nullptr;
  return &clauses.back();
}

std::optional<std::int64_t> ParseTree::filter_id() const {
  std::optional<std::int64_t> id;
  for (const auto& c : clauses) {
    if (c.op == OpName::filter && c.args.size() == 2) {
      id = std::get<std::int64_t>(c.args[1]);
    }
  }
  return id;
}

bool ParseTree::has_filter_id() const { return filter_id().has_value(); }

bool ParseTree::has_custom_input() const {
  return std::any_of(clauses.begin(), clauses.end(),
                     [](const Clause& c) { return c.op == OpName::custominput; });
}

ParseTree parse_string(std::string_view text) {
  const auto tokens = lex(text);
  if (tokens.empty()) throw GrammarError("empty parse", 0);

  ParseTree tree;
  std::vector<std::size_t> clause_pos;
  std::size_t pos = 0;
  while (true) {
    if (pos >= tokens.size()) {
      throw GrammarError("expected an operation after connective", pos);
    }
    const auto& head = tokens[pos];
    if (head.quoted) throw GrammarError("expected an operation name", pos);
    auto op = parse_op_name(to_lower(head.text));
    if (!op) {
      throw GrammarError(fmt::format("unknown operation '{}'", head.text), pos);
    }
    std::size_t end = pos + 1;
    while (end < tokens.size() && !is_connective(tokens[end])) ++end;
    tree.clauses.push_back({*op, parse_args(signature(*op), tokens, pos + 1, end)});
    clause_pos.push_back(pos);
    if (end >= tokens.size()) break;
    tree.connectives.push_back(is_keyword(tokens[end], "and") ? Connective::and_
                                                              : Connective::or_);
    pos = end + 1;
  }
  check_structure(tree, clause_pos);
  return tree;
}

std::string render_arg(const Arg& arg) {
  if (const auto* i = std::get_if<std::int64_t>(&arg)) return std::to_string(*i);
  if (const auto* k = std::get_if<Keyword>(&arg)) return to_lower(k->value);
  const auto& s = std::get<QuotedString>(arg).value;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string canonicalize(const ParseTree& tree) {
  std::string out;
  for (std::size_t i = 0; i < tree.clauses.size(); ++i) {
    if (i > 0) {
      out += ' ';
      out += to_string(tree.connectives[i - 1]);
      out += ' ';
    }
    out += to_string(tree.clauses[i].op);
    for (const auto& a : tree.clauses[i].args) {
      out += ' ';
      out += render_arg(a);
    }
  }
  return out;
}

std::string canonical_form(std::string_view text) {
  return canonicalize(parse_string(text));
}

void validate(const ParseTree& tree) {
  if (tree.clauses.empty()) throw GrammarError("empty parse", 0);
  if (tree.connectives.size() + 1 != tree.clauses.size()) {
    throw GrammarError("connective count does not match clauses", 0);
  }
  if (parse_string(canonicalize(tree)) != tree) {
    throw GrammarError("tree is not in normalized form", 0);
  }
}

}  // namespace modeltalk
