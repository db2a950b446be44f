#include "modeltalk/intent.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "modeltalk/errors.hpp"
#include "modeltalk/grammar.hpp"
#include "modeltalk/http.hpp"
#include "modeltalk/text.hpp"

namespace modeltalk {

namespace {

const std::map<std::string, std::string, std::less<>>& dummy_values() {
  static const std::map<std::string, std::string, std::less<>> values = {
      {"id", std::to_string(kDummyId)},
      {"number", "2"},
      {"class_names", "offensive"},
      {"data_type", "test"},
      {"metric", "f1"},
      {"include_token", "ugly"},
      {"sentence_level", "sentence"},
  };
  return values;
}

// Names of the {slot} placeholders of a template, in order.
std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    auto close = text.find('}', pos);
    if (close == std::string_view::npos) break;
    out.emplace_back(text.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return out;
}

template <typename Lookup>
std::string substitute(std::string_view text, Lookup&& lookup) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    auto close = text.find('}', open);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    out += lookup(std::string(text.substr(open + 1, close - open - 1)));
    pos = close + 1;
  }
  return out;
}

// Keeps or drops each [ ... ] segment.
template <typename Keep>
std::string resolve_optional_segments(std::string_view text, Keep&& keep) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find('[', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    auto close = text.find(']', open);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    auto inner = text.substr(open + 1, close - open - 1);
    if (keep(placeholders(inner))) out.append(inner);
    pos = close + 1;
  }
  return out;
}

std::string collapse_spaces(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      out += c;
      space = false;
    }
  }
  return out;
}

std::string escape_quoted(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string intent_of_parse(std::string_view canonical) {
  auto tree = parse_string(canonical);
  return std::string(to_string(tree.clauses.back().op));
}

std::string default_for(const OperationSignature& sig, std::string_view slot) {
  for (const auto& s : sig.optional_slots) {
    if (s.name == slot) return s.default_value;
  }
  for (const auto& s : sig.required_slots) {
    if (s.name == slot) return s.default_value;
  }
  return {};
}

const std::map<std::string, std::int64_t, std::less<>>& number_words() {
  static const std::map<std::string, std::int64_t, std::less<>> words = {
      {"one", 1},      {"two", 2},       {"three", 3},     {"four", 4},
      {"five", 5},     {"six", 6},       {"seven", 7},     {"eight", 8},
      {"nine", 9},     {"ten", 10},      {"eleven", 11},   {"twelve", 12},
      {"fifteen", 15}, {"twenty", 20},   {"couple", 2},    {"pair", 2},
      {"single", 1}};
  return words;
}

std::optional<std::int64_t> integer_token(std::string_view tok) {
  if (tok.empty() || tok.size() > 12) return std::nullopt;
  if (!std::all_of(tok.begin(), tok.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoll(std::string(tok));
}

bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase, std::size_t* at = nullptr) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + i)) {
      if (at) *at = i;
      return true;
    }
  }
  return false;
}

std::vector<std::string> words_of(std::string_view text) {
  auto tt = tokenize(text);
  return tt.tokens;
}

}  // namespace

std::string strip_placeholders(std::string_view text) {
  // A separator keeps bigrams from spanning the gap, so the filled-in
  // utterance embeds identically to its entry.
  return collapse_spaces(substitute(text, [](const std::string&) {
    return " " + std::string(kFieldSeparator) + " ";
  }));
}

std::string fill_with_dummies(std::string_view text) {
  auto kept = resolve_optional_segments(text, [](const auto&) { return true; });
  return collapse_spaces(substitute(kept, [](const std::string& name) {
    auto it = dummy_values().find(name);
    return it == dummy_values().end() ? std::string() : it->second;
  }));
}

InstantiatedEntry instantiate_entry(const PromptEntry& entry, const Dataset* dataset) {
  auto values = dummy_values();
  if (dataset) values["class_names"] = dataset->class_names().front();
  const auto in_utterance = placeholders(entry.utterance);
  auto present = [&](const std::string& name) {
    return std::find(in_utterance.begin(), in_utterance.end(), name) !=
           in_utterance.end();
  };

  InstantiatedEntry out;
  out.utterance = collapse_spaces(substitute(entry.utterance, [&](const std::string& name) {
    return values[name];
  }));

  const auto& sig = *find_signature(entry.intent);
  auto parse = resolve_optional_segments(entry.parse_template, [&](const auto& names) {
    return std::all_of(names.begin(), names.end(), present);
  });
  parse = substitute(parse, [&](const std::string& name) -> std::string {
    if (present(name)) return values[name];
    if (name == "id") return std::to_string(kDummyId);
    if (name == "sentence_level") return "";
    if (name == "metric") return "accuracy";
    return default_for(sig, name);
  });
  out.parse = canonical_form(collapse_spaces(parse));
  return out;
}

PromptBank::PromptBank(std::vector<PromptEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw LoadError("prompt bank is empty");
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    std::string filled = fill_with_dummies(e.parse_template);
    try {
      e.intent = intent_of_parse(filled);
    } catch (const GrammarError& err) {
      throw LoadError(fmt::format("prompt bank entry {} ('{}'): {}", i + 1,
                                  e.parse_template, err.what()));
    }
    docs.push_back(strip_placeholders(e.utterance));
  }
  vectorizer_ = TfidfVectorizer(docs);
  for (const auto& d : docs) embeddings_.push_back(vectorizer_.embed(d));
}

PromptBank PromptBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open prompt bank " + path.string());
  std::vector<PromptEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto tab = t.find('\t');
    if (tab == std::string_view::npos) {
      throw LoadError(fmt::format("prompt bank line {}: expected utterance<TAB>parse",
                                  line_no));
    }
    entries.push_back({std::string(trim(t.substr(0, tab))),
                       std::string(trim(t.substr(tab + 1))), ""});
  }
  return PromptBank(std::move(entries));
}

SparseVector PromptBank::embed(std::string_view text) const {
  return vectorizer_.embed(text);
}

std::vector<IntentCandidate> rank_intents(std::string_view utterance,
                                          const PromptBank& bank, std::size_t k) {
  const auto query = bank.embed(utterance);
  std::vector<IntentCandidate> all;
  all.reserve(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double s = dot(query, bank.embeddings()[i]);
    s = std::clamp(s, 0.0, 1.0);
    all.push_back({bank.entries()[i].intent, s, i});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const IntentCandidate& a, const IntentCandidate& b) {
                     return a.score > b.score;
                   });
  if (all.size() > k) all.resize(k);
  return all;
}

SlotTagging tag_slots(std::string_view utterance, std::string_view intent,
                      const Dataset* dataset) {
  SlotTagging out;
  auto& slots = out.slots;
  const auto tokens = words_of(utterance);
  std::vector<bool> used(tokens.size(), false);

  // Quoted include token: "..." or '...'.
  for (char q : {'"', '\''}) {
    if (slots.include_token) break;
    for (std::size_t open = utterance.find(q); open != std::string_view::npos;
         open = utterance.find(q, open + 1)) {
      // Apostrophes inside words ("don't") are not quotes.
      if (q == '\'' && open > 0 &&
          std::isalnum(static_cast<unsigned char>(utterance[open - 1]))) {
        continue;
      }
      auto close = utterance.find(q, open + 1);
      if (close == std::string_view::npos) break;
      auto inner = trim(utterance.substr(open + 1, close - open - 1));
      if (!inner.empty()) {
        slots.include_token = to_lower(inner);
        break;
      }
    }
  }

  static const std::set<std::string, std::less<>> id_cues = {
      "id", "ids", "sample", "instance", "example", "point", "datapoint", "item",
      "entry", "row", "record", "text"};
  static const std::set<std::string, std::less<>> id_fillers = {"number", "no", "nr", "#", "with", "of", "the"};
  for (std::size_t i = 0; i < tokens.size() && !slots.id; ++i) {
    if (!id_cues.contains(tokens[i])) continue;
    std::size_t j = i + 1;
    while (j < tokens.size() && id_fillers.contains(tokens[j]) && j < i + 3) ++j;
    if (j < tokens.size()) {
      if (auto v = integer_token(tokens[j])) {
        slots.id = *v;
        used[j] = true;
      }
    }
  }

  const auto* sig = find_signature(intent);
  auto sig_has = [&](std::string_view slot) {
    if (!sig) return false;
    auto match = [&](const SlotSpec& s) { return s.name == slot; };
    return std::any_of(sig->required_slots.begin(), sig->required_slots.end(), match) ||
           std::any_of(sig->optional_slots.begin(), sig->optional_slots.end(), match);
  };

  for (std::size_t i = 0; i < tokens.size() && !slots.number; ++i) {
    if (used[i]) continue;
    if (auto v = integer_token(tokens[i])) {
      // A bare integer is an id for instance operations without a count.
      if (!slots.id && sig_has("id") && !sig_has("number")) {
        slots.id = *v;
      } else {
        slots.number = *v;
      }
      used[i] = true;
      continue;
    }
    auto it = number_words().find(tokens[i]);
    if (it != number_words().end()) {
      // "this one", "that one", "similar one" are references, not counts.
      const bool reference = tokens[i] == "one" && i > 0 &&
                             (tokens[i - 1] == "this" || tokens[i - 1] == "that" ||
                              tokens[i - 1] == "similar" || tokens[i - 1] == "the" ||
                              tokens[i - 1] == "another");
      if (!reference) {
        slots.number = it->second;
        used[i] = true;
      }
    }
  }

  if (!slots.include_token) {
    static const std::set<std::string, std::less<>> include_cues = {
        "word", "token", "term", "containing", "contain", "contains", "include",
        "includes", "including", "mention", "mentions", "mentioning", "keyword"};
    static const std::set<std::string, std::less<>> skip = {
        "the", "a", "an", "word", "token", "term", "keyword", "words", "tokens"};
    for (std::size_t i = 0; i < tokens.size() && !slots.include_token; ++i) {
      if (!include_cues.contains(tokens[i])) continue;
      std::size_t j = i + 1;
      while (j < tokens.size() && skip.contains(tokens[j])) ++j;
      if (j < tokens.size() && !used[j] && !integer_token(tokens[j]) &&
          !is_stopword(tokens[j])) {
        slots.include_token = tokens[j];
        used[j] = true;
      }
    }
  }

  if (dataset) {
    // Longest phrase wins; aliases map onto label strings.
    std::vector<std::pair<std::string, std::string>> phrases;
    for (const auto& label : dataset->class_names()) phrases.emplace_back(label, label);
    for (const auto& [alias, label] : dataset->label_aliases()) phrases.emplace_back(alias, label);
    std::stable_sort(phrases.begin(), phrases.end(), [](const auto& a, const auto& b) {
      return words_of(a.first).size() > words_of(b.first).size();
    });
    for (const auto& [phrase, label] : phrases) {
      std::size_t at = 0;
      auto words = words_of(phrase);
      if (contains_phrase(tokens, words, &at)) {
        // "not offensive" must not also read as "offensive".
        if (at > 0 && (tokens[at - 1] == "not" || tokens[at - 1] == "non")) continue;
        slots.class_names = label;
        break;
      }
    }
  }

  static const std::map<std::string, std::string, std::less<>> metric_words = {
      {"accuracy", "accuracy"}, {"accurate", "accuracy"}, {"acc", "accuracy"},
      {"precision", "precision"}, {"precise", "precision"}, {"recall", "recall"},
      {"f1", "f1"}, {"f1-score", "f1"}, {"fscore", "f1"}, {"f-score", "f1"},
      {"f-measure", "f1"}, {"f1score", "f1"}};
  for (std::size_t i = 0; i < tokens.size() && !slots.metric; ++i) {
    auto it = metric_words.find(tokens[i]);
    if (it != metric_words.end()) slots.metric = it->second;
    if (tokens[i] == "f" && i + 1 < tokens.size() &&
        (tokens[i + 1] == "score" || tokens[i + 1] == "measure")) {
      slots.metric = "f1";
    }
  }

  static const std::map<std::string, SplitTag, std::less<>> split_words = {
      {"train", SplitTag::train}, {"training", SplitTag::train},
      {"dev", SplitTag::dev},     {"development", SplitTag::dev},
      {"validation", SplitTag::dev}, {"test", SplitTag::test},
      {"testing", SplitTag::test}};
  for (const auto& t : tokens) {
    auto it = split_words.find(t);
    if (it != split_words.end()) {
      slots.data_type = it->second;
      break;
    }
  }

  for (const auto& t : tokens) {
    if (t == "sentence" || t == "sentences" || t == "sentence-level") {
      slots.sentence_level = true;
    }
  }

  if (slots.id && dataset && !dataset->contains(*slots.id)) {
    out.issues.push_back({"id", fmt::format("there is no instance with id {}", *slots.id)});
  }
  if (slots.number && *slots.number < 1) {
    out.issues.push_back({"number", "the number has to be at least 1"});
  }
  return out;
}

std::string default_template(std::string_view intent) {
  const auto* sig = find_signature(intent);
  if (!sig || sig->is_connective()) {
    throw ArgumentError(fmt::format("unknown intent '{}'", intent));
  }
  std::string t;
  const bool needs_id = std::any_of(sig->required_slots.begin(), sig->required_slots.end(),
                                    [](const SlotSpec& s) { return s.name == "id"; });
  if (needs_id && sig->name != "filter") t = "filter id {id} and ";
  t += sig->name;
  if (sig->name == "filter") t += " id {id}";
  else if (sig->name == "includes") t += " \"{include_token}\"";
  else if (sig->name == "score") t += " {metric}";
  else if (sig->name == "data") t += " [{data_type}]";
  else if (sig->name == "nlpattribute") t += " topk {number} {sentence_level}";
  else if (sig->name == "globaltopk") t += " {number} [class \"{class_names}\"]";
  else if (sig->name == "nlpcfe" || sig->name == "keywords" || sig->name == "similar") {
    t += " {number}";
  }
  return t;
}

ComposeResult compose_parse(std::string_view parse_template, const SlotMap& slots,
                            const ReferenceContext& context) {
  const std::string intent = intent_of_parse(fill_with_dummies(parse_template));
  const auto& sig = *find_signature(intent);

  auto has_slot = [&](const std::string& name) {
    if (name == "id") return slots.id.has_value();
    if (name == "number") return slots.number.has_value();
    if (name == "class_names") return slots.class_names.has_value();
    if (name == "data_type") return slots.data_type.has_value();
    if (name == "metric") return slots.metric.has_value();
    if (name == "include_token") return slots.include_token.has_value();
    if (name == "sentence_level") return slots.sentence_level;
    return false;
  };

  std::string t = resolve_optional_segments(parse_template, [&](const auto& names) {
    return std::all_of(names.begin(), names.end(), has_slot);
  });

  const std::string binding = "filter id {id}";
  const bool binds_instance = t.find(binding) != std::string::npos;
  const bool optional_instance =
      std::any_of(sig.optional_slots.begin(), sig.optional_slots.end(),
                  [](const SlotSpec& s) { return s.name == "id"; });
  if (!binds_instance && optional_instance &&
      (slots.id || (context.deictic && context.previous) || context.custom_subject)) {
    t = binding + " and " + t;
  }

  if (t.find(binding) != std::string::npos && !slots.id) {
    if (!context.previous) {
      return MissingSlot{"id", intent, std::string(parse_template), slots, ""};
    }
    if (context.previous->kind == InstanceRef::Kind::custom) {
      if (!sig.supports_custom_input) return UnsupportedCustomInput{intent};
      t.replace(t.find(binding), binding.size(), "custominput");
    }
  }

  std::optional<MissingSlot> missing;
  auto value = [&](const std::string& name) -> std::string {
    if (name == "id") {
      return std::to_string(slots.id ? *slots.id : context.previous->id);
    }
    if (name == "number") {
      if (slots.number) return std::to_string(*slots.number);
      auto d = default_for(sig, "number");
      if (d.empty() && !missing) missing = MissingSlot{"number", intent, std::string(parse_template), slots, ""};
      return d;
    }
    if (name == "metric") return slots.metric.value_or("accuracy");
    if (name == "class_names") return escape_quoted(slots.class_names.value_or(""));
    if (name == "data_type") {
      return slots.data_type ? std::string(to_string(*slots.data_type)) : "";
    }
    if (name == "include_token") {
      if (!slots.include_token) {
        if (!missing) missing = MissingSlot{"include_token", intent, std::string(parse_template), slots, ""};
        return "";
      }
      return escape_quoted(*slots.include_token);
    }
    if (name == "sentence_level") return slots.sentence_level ? "sentence" : "";
    return "";
  };
  t = substitute(t, value);
  if (missing) return *missing;

  try {
    return canonical_form(collapse_spaces(t));
  } catch (const GrammarError& e) {
    return MissingSlot{slots.number ? "number" : "", intent, std::string(parse_template),
                       slots, e.what()};
  }
}

ComposeResult compose_parse_for_intent(std::string_view intent, const SlotMap& slots,
                                       const ReferenceContext& context) {
  return compose_parse(default_template(intent), slots, context);
}

std::string_view to_string(SmalltalkKind kind) {
  switch (kind) {
    case SmalltalkKind::greeting: return "greeting";
    case SmalltalkKind::acknowledgment: return "acknowledgment";
    case SmalltalkKind::farewell: return "farewell";
  }
  return "greeting";
}

std::optional<SmalltalkKind> detect_smalltalk(std::string_view utterance) {
  static const std::set<std::string, std::less<>> farewell = {
      "bye", "goodbye", "bye-bye", "farewell", "cya", "ciao"};
  static const std::set<std::string, std::less<>> greeting = {
      "hi", "hello", "hey", "hiya", "howdy", "greetings", "morning", "evening",
      "afternoon", "heya", "hallo"};
  static const std::set<std::string, std::less<>> acknowledgment = {
      "ok", "okay", "thanks", "thank", "thx", "great", "cool", "nice", "perfect",
      "awesome", "alright", "understood", "got", "fine", "wow", "interesting",
      "good", "excellent", "sounds", "helpful", "sure", "k", "ty", "neat"};
  static const std::set<std::string, std::less<>> filler = {
      "there", "you", "it", "looks", "look", "that", "this", "is", "so", "much",
      "very", "a", "lot", "me", "i", "see", "now", "makes", "sense", "good",
      "bot", "again", "all", "really", "oh", "ah", "yes", "yeah", "indeed",
      "to", "the", "for", "that's", "it's", "nice", "great", "and", "well",
      "think", "today", "for", "just", "one", "what's", "up", "how", "are",
      "doing", "everyone", "friend", "buddy"};

  const auto tokens = words_of(utterance);
  if (tokens.empty()) return std::nullopt;
  for (const auto& t : tokens) {
    if (farewell.contains(t)) return SmalltalkKind::farewell;
  }
  if (contains_phrase(tokens, {"see", "you"}) || contains_phrase(tokens, {"that's", "all"})) {
    return SmalltalkKind::farewell;
  }

  auto only = [&](const auto& lexicon) {
    bool cue = false;
    for (const auto& t : tokens) {
      if (lexicon.contains(t)) {
        cue = true;
      } else if (!filler.contains(t)) {
        return false;
      }
    }
    return cue;
  };
  if (only(greeting)) return SmalltalkKind::greeting;
  if (only(acknowledgment)) return SmalltalkKind::acknowledgment;
  return std::nullopt;
}

bool has_deictic_reference(std::string_view utterance) {
  const auto tokens = words_of(utterance);
  static const std::set<std::string, std::less<>> non_instance = {
      "dataset", "data", "model", "system", "tool", "bot", "label", "class",
      "task", "conversation", "corpus", "metric", "operation"};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "it") return true;
    if (tokens[i] == "this" || tokens[i] == "that") {
      const bool next_non_instance =
          i + 1 < tokens.size() && non_instance.contains(tokens[i + 1]);
      if (tokens[i] == "that" && !(i + 1 < tokens.size() && tokens[i + 1] == "one")) {
        continue;
      }
      if (!next_non_instance) return true;
    }
  }
  return false;
}

bool mentions_dataset_scope(std::string_view utterance) {
  static const std::set<std::string, std::less<>> cues = {
      "dataset", "data", "overall", "all", "whole", "entire", "distribution",
      "each", "every", "instances", "globally"};
  const auto tokens = words_of(utterance);
  return std::any_of(tokens.begin(), tokens.end(),
                     [](const std::string& t) { return cues.contains(t); });
}

ParseResult IntentParser::compose_from_entry(
    std::size_t entry, std::string_view utterance,
    const std::optional<InstanceRef>& previous) const {
  const auto& e = bank_->entries().at(entry);
  auto tagged = tag_slots(utterance, e.intent, dataset_);
  if (!tagged.issues.empty()) {
    const auto& issue = tagged.issues.front();
    return MissingSlot{issue.slot, e.intent, e.parse_template, tagged.slots, issue.message};
  }
  ReferenceContext ctx{previous, has_deictic_reference(utterance), false};
  ctx.custom_subject = previous && previous->kind == InstanceRef::Kind::custom &&
                       !mentions_dataset_scope(utterance);
  auto composed = compose_parse(e.parse_template, tagged.slots, ctx);
  if (auto* s = std::get_if<std::string>(&composed)) {
    return Parsed{*s, IntentCandidate{e.intent, 1.0, entry}};
  }
  if (auto* m = std::get_if<MissingSlot>(&composed)) return *m;
  return std::get<UnsupportedCustomInput>(composed);
}

ParseResult IntentParser::parse(std::string_view utterance,
                                const std::optional<InstanceRef>& previous) const {
  if (auto kind = detect_smalltalk(utterance)) return Smalltalk{*kind};
  auto ranked = rank_intents(utterance, *bank_, std::max<std::size_t>(config_.top_k, 2));
  if (ranked.empty() || ranked.front().score <= 0.0) return Unrecognized{};

  const auto& top = ranked.front();
  constexpr double kExactMatch = 1.0 - 1e-9;
  if (top.score < kExactMatch) {
    std::vector<IntentCandidate> close{top};
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      const auto& c = ranked[i];
      if (top.score - c.score >= config_.ambiguity_epsilon) break;
      const bool seen = std::any_of(close.begin(), close.end(), [&](const auto& x) {
        return x.intent == c.intent;
      });
      if (!seen) close.push_back(c);
    }
    if (close.size() > 1) return Ambiguous{std::move(close), std::string(utterance)};
  }

  auto result = compose_from_entry(top.entry, utterance, previous);
  if (auto* p = std::get_if<Parsed>(&result)) p->intent = top;
  return result;
}

ParseResult parse_utterance(std::string_view utterance, const PromptBank& bank,
                            const Dataset* dataset,
                            const std::optional<InstanceRef>& previous,
                            const IntentConfig& config) {
  return IntentParser(bank, dataset, config).parse(utterance, previous);
}

HttpExternalParser::HttpExternalParser(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

std::optional<std::string> HttpExternalParser::parse(std::string_view utterance,
                                                     std::string_view context_id) {
  nlohmann::json body = {{"utterance", utterance}, {"context_id", context_id}};
  auto reply = post_json(url_, body.dump(), timeout_);
  if (!reply) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(*reply);
    return canonical_form(j.at("parse").get<std::string>());
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace modeltalk
