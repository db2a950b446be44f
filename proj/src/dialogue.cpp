#include "modeltalk/dialogue.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <set>

#include "modeltalk/errors.hpp"

namespace modeltalk {

namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Words that pick one intent out of an ambiguity question.
const std::map<std::string, std::vector<std::string>>& intent_cues() {
  static const std::map<std::string, std::vector<std::string>> cues = {
      {"nlpattribute", {"nlpattribute", "important", "importance", "attribution", "salient"}},
      {"globaltopk", {"globaltopk", "global", "overall"}},
      {"nlpcfe", {"nlpcfe", "counterfactual", "counterfactuals", "flip"}},
      {"adversarial", {"adversarial", "attack"}},
      {"augment", {"augment", "augmentation", "augmented"}},
      {"rationalize", {"rationalize", "rationale", "explanation"}},
      {"keywords", {"keywords", "keyword", "frequent"}},
      {"similar", {"similar"}},
      {"predict", {"predict", "prediction"}},
      {"likelihood", {"likelihood", "probability", "probabilities", "confidence"}},
      {"mistakes", {"mistakes", "errors", "wrong"}},
      {"score", {"score", "accuracy", "performance"}},
      {"show", {"show"}},
      {"countdata", {"count", "many"}},
      {"label", {"label", "labels", "distribution"}},
      {"data", {"data", "dataset"}},
      {"model", {"model"}},
      {"function", {"function", "capabilities"}},
      {"self", {"self", "yourself"}},
  };
  return cues;
}

std::string action_label(ResultType t) {
  switch (t) {
    case ResultType::greeting:
    case ResultType::acknowledgment:
    case ResultType::farewell:
      return "smalltalk";
    case ResultType::clarify_intent:
    case ResultType::clarify_id:
    case ResultType::clarify_slot:
    case ResultType::clarify_invalid:
      return "clarify";
    case ResultType::clarify_abandon:
      return "abandon";
    case ResultType::unsupported_custom_input:
      return "unsupported";
    case ResultType::unrecognized:
      return "unrecognized";
    default:
      return "error";
  }
}

ResultType smalltalk_type(SmalltalkKind k) {
  switch (k) {
    case SmalltalkKind::greeting:
      return ResultType::greeting;
    case SmalltalkKind::acknowledgment:
      return ResultType::acknowledgment;
    case SmalltalkKind::farewell:
      break;
  }
  return ResultType::farewell;
}

DialogueAction reply(OperationResult r) {
  DialogueAction a;
  a.kind = DialogueAction::Kind::reply;
  a.result = std::move(r);
  return a;
}

DialogueAction clarify(OperationResult r) {
  DialogueAction a;
  a.kind = DialogueAction::Kind::ask_clarification;
  a.result = std::move(r);
  return a;
}

DialogueAction execute(std::string parse) {
  DialogueAction a;
  a.kind = DialogueAction::Kind::execute;
  a.parse = std::move(parse);
  return a;
}

OperationResult unsupported(const std::string& intent) {
  json supported = json::array();
  for (const auto& s : registry()) {
    if (s.supports_custom_input && !s.is_filter()) supported.push_back(s.name);
  }
  return make_result(ResultType::unsupported_custom_input,
                     {{"intent", intent}, {"supported", supported}});
}

}  // namespace

DialogueState::DialogueState(std::string id, std::uint64_t base_seed)
    : conversation_id(std::move(id)), seed(base_seed ^ fnv1a(conversation_id)) {}

std::string clarification_task(std::string_view intent) {
  static const std::map<std::string, std::string, std::less<>> tasks = {
      {"nlpcfe", "a counterfactual"},
      {"nlpattribute", "feature importances"},
      {"likelihood", "class probabilities"},
      {"predict", "a prediction"},
      {"adversarial", "an adversarial example"},
      {"augment", "an augmented example"},
      {"rationalize", "a rationale"},
      {"similar", "similar instances"},
      {"show", "the details"},
  };
  auto it = tasks.find(intent);
  return it == tasks.end() ? "an answer" : it->second;
}

DialogueManager::DialogueManager(const IntentParser& parser, const Executor& executor,
                                 const Responder& responder, ExternalParser* external)
    : parser_(&parser), executor_(&executor), responder_(&responder), external_(external) {}

DialogueAction DialogueManager::clarify_for(const MissingSlot& missing) const {
  if (!missing.reason.empty()) {
    return clarify(make_result(ResultType::clarify_invalid,
                               {{"intent", missing.intent}, {"slot", missing.slot},
                                {"reason", missing.reason}}));
  }
  if (missing.slot == "id") {
    return clarify(make_result(ResultType::clarify_id,
                               {{"intent", missing.intent},
                                {"task", clarification_task(missing.intent)}}));
  }
  return clarify(make_result(ResultType::clarify_slot,
                             {{"intent", missing.intent}, {"slot", missing.slot}}));
}

DialogueAction DialogueManager::from_parse_result(DialogueState& state,
                                                  std::string_view utterance,
                                                  ParseResult result) const {
  if (auto* p = std::get_if<Parsed>(&result)) return execute(p->parse);
  if (auto* a = std::get_if<Ambiguous>(&result)) {
    json candidates = json::array();
    for (const auto& c : a->candidates) {
      const auto* sig = find_signature(c.intent);
      candidates.push_back({{"intent", c.intent},
                            {"score", c.score},
                            {"description", sig ? sig->description : ""}});
    }
    PendingClarification p;
    p.kind = PendingClarification::Kind::ambiguous;
    p.utterance = std::string(utterance);
    p.candidates = a->candidates;
    state.pending = std::move(p);
    return clarify(make_result(ResultType::clarify_intent, {{"candidates", candidates}}));
  }
  if (auto* m = std::get_if<MissingSlot>(&result)) {
    PendingClarification p;
    p.kind = PendingClarification::Kind::missing_slot;
    p.utterance = std::string(utterance);
    p.missing = *m;
    state.pending = std::move(p);
    return clarify_for(*m);
  }
  if (auto* s = std::get_if<Smalltalk>(&result)) {
    DialogueAction a;
    a.kind = DialogueAction::Kind::smalltalk_reply;
    a.result = make_result(smalltalk_type(s->kind));
    if (s->kind == SmalltalkKind::farewell) state.finished = true;
    return a;
  }
  if (auto* u = std::get_if<UnsupportedCustomInput>(&result)) return reply(unsupported(u->intent));
  return reply(make_result(ResultType::unrecognized));
}

DialogueAction DialogueManager::resolve_pending(DialogueState& state,
                                                std::string_view utterance) const {
  auto pending = *state.pending;
  state.pending.reset();
  const auto words = tokenize(utterance).tokens;
  const std::set<std::string> word_set(words.begin(), words.end());

  if (pending.kind == PendingClarification::Kind::ambiguous) {
    std::vector<std::size_t> matched;
    for (std::size_t i = 0; i < pending.candidates.size(); ++i) {
      const auto& intent = pending.candidates[i].intent;
      auto it = intent_cues().find(intent);
      std::vector<std::string> cues = it == intent_cues().end()
                                          ? std::vector<std::string>{intent}
                                          : it->second;
      if (std::any_of(cues.begin(), cues.end(), [&](const auto& c) { return word_set.contains(c); })) {
        matched.push_back(i);
      }
    }
    if (matched.empty()) {
      static const std::vector<std::string> ordinals = {"first", "second", "third"};
      for (std::size_t i = 0; i < ordinals.size() && i < pending.candidates.size(); ++i) {
        if (word_set.contains(ordinals[i])) matched.push_back(i);
      }
    }
    if (matched.size() == 1) {
      const auto& c = pending.candidates[matched.front()];
      const auto combined = pending.utterance + " " + std::string(utterance);
      return from_parse_result(state, utterance,
                               parser_->compose_from_entry(c.entry, combined, state.last_instance));
    }
  } else {
    const auto& missing = pending.missing;
    const auto& ds = executor_->dataset();
    auto tagged = tag_slots(utterance, missing.intent, &ds);
    auto merged = missing.slots;
    const auto& t = tagged.slots;
    if (missing.slot == "id" && !t.id && t.number) {
      merged.id = t.number;
    } else {
      if (t.id) merged.id = t.id;
      if (t.number) merged.number = t.number;
    }
    if (t.class_names) merged.class_names = t.class_names;
    if (t.data_type) merged.data_type = t.data_type;
    if (t.metric) merged.metric = t.metric;
    if (t.include_token) merged.include_token = t.include_token;
    merged.sentence_level = merged.sentence_level || t.sentence_level;

    const bool bad_id = merged.id && !ds.contains(*merged.id);
    if (!bad_id) {
      ReferenceContext ctx{state.last_instance, has_deictic_reference(utterance), false};
      ctx.custom_subject = state.last_instance &&
                           state.last_instance->kind == InstanceRef::Kind::custom &&
                           !mentions_dataset_scope(pending.utterance + " " + std::string(utterance));
      auto composed = compose_parse(missing.parse_template, merged, ctx);
      if (auto* s = std::get_if<std::string>(&composed)) return execute(*s);
      if (auto* u = std::get_if<UnsupportedCustomInput>(&composed)) {
        return reply(unsupported(u->intent));
      }
    }
  }

  // Not an answer. The user may simply have moved on.
  auto fresh = parser_->parse(utterance, state.last_instance);
  if (std::holds_alternative<Parsed>(fresh) || std::holds_alternative<Smalltalk>(fresh) ||
      std::holds_alternative<UnsupportedCustomInput>(fresh)) {
    return from_parse_result(state, utterance, std::move(fresh));
  }
  if (pending.reasks == 0) {
    ++pending.reasks;
    auto question = pending.kind == PendingClarification::Kind::ambiguous
                        ? from_parse_result(state, pending.utterance,
                                            Ambiguous{pending.candidates, pending.utterance})
                        : clarify_for(pending.missing);
    state.pending = pending;
    return question;
  }
  return reply(make_result(ResultType::clarify_abandon));
}

DialogueAction DialogueManager::step(DialogueState& state, std::string_view utterance) const {
  if (state.pending) return resolve_pending(state, utterance);

  if (external_ && !detect_smalltalk(utterance)) {
    std::string context = state.last_instance && state.last_instance->kind == InstanceRef::Kind::dataset
                              ? std::to_string(state.last_instance->id)
                              : "";
    if (auto parse = external_->parse(utterance, context)) return execute(*parse);
  }
  return from_parse_result(state, utterance, parser_->parse(utterance, state.last_instance));
}

TurnResponse DialogueManager::handle(DialogueState& state, std::string_view utterance) const {
  const auto turn_seed = state.seed + 0x9E3779B97F4A7C15ULL * (state.turns.size() + 1);
  auto action = step(state, utterance);

  Turn turn;
  turn.ts = utc_timestamp();
  turn.utterance = std::string(utterance);
  TurnResponse response;
  if (action.kind == DialogueAction::Kind::execute) {
    try {
      const auto tree = parse_string(action.parse);
      const auto canonical = canonicalize(tree);
      const auto result = executor_->execute(tree, state.custom_input);
      if (tree.has_custom_input()) {
        state.last_instance = InstanceRef::custom();
      } else if (auto id = tree.filter_id(); id && executor_->dataset().contains(*id)) {
        state.last_instance = InstanceRef::of(*id);
      }
      if (std::any_of(tree.clauses.begin(), tree.clauses.end(), [](const Clause& c) {
            return c.op == OpName::filter || c.op == OpName::includes;
          })) {
        state.active_filter = executor_->selection(tree);
      }
      response = responder_->render(result, turn_seed);
      response.parse = canonical;
      turn.parse = canonical;
      turn.action = "execute";
    } catch (const Error& e) {
      response = responder_->render(make_result(ResultType::error, {{"message", e.what()}}),
                                    turn_seed);
      response.parse = action.parse;
      turn.parse = action.parse;
      turn.action = "error";
    }
  } else {
    response = responder_->render(*action.result, turn_seed);
    turn.action = action_label(action.result->type);
  }
  turn.response = response;
  state.turns.push_back(std::move(turn));
  return response;
}

void DialogueManager::set_custom_input(DialogueState& state, std::string_view text) const {
  if (trim(text).empty()) throw ArgumentError("custom input is empty");
  state.custom_input = std::string(trim(text));
  state.last_instance = InstanceRef::custom();
}

TurnResponse DialogueManager::smalltalk_response(SmalltalkKind kind, std::uint64_t seed) const {
  return responder_->render(make_result(smalltalk_type(kind)), seed);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)),
                     static_cast<int>(ms));
}

void TurnLog::append(const nlohmann::json& line) const {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to turn log " + path_.string());
  out << line.dump() << '\n';
}

void TurnLog::append_turn(std::size_t index, const Turn& turn) const {
  json line = {{"event", "turn"},
               {"ts", turn.ts},
               {"turn_index", index},
               {"utterance", turn.utterance},
               {"action", turn.action},
               {"response", turn.response.text},
               {"payload", turn.response.payload}};
  if (!turn.parse.empty()) line["parse"] = turn.parse;
  append(line);
}

void TurnLog::append_custom_input(std::string_view text) const {
  append({{"event", "custom_input"}, {"ts", utc_timestamp()}, {"text", text}});
}

void TurnLog::append_feedback(std::size_t turn_index, int rating) const {
  if (rating < -1 || rating > 1) throw ArgumentError("rating must be -1, 0 or 1");
  append({{"event", "feedback"}, {"ts", utc_timestamp()}, {"turn_index", turn_index},
          {"rating", rating}});
}

std::vector<TurnLog::Entry> TurnLog::read() const {
  std::vector<Entry> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      Entry e;
      e.event = j.at("event").get<std::string>();
      e.turn_index = j.value("turn_index", std::size_t{0});
      e.utterance = j.value("utterance", "");
      e.parse = j.value("parse", "");
      e.text = e.event == "custom_input" ? j.value("text", "") : j.value("response", "");
      if (j.contains("rating")) e.rating = j["rating"].get<int>();
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw LoadError(fmt::format("{}:{}: {}", path_.string(), line_no, ex.what()));
    }
  }
  return out;
}

std::vector<TurnLog::Entry> TurnLog::turns() const {
  std::vector<Entry> turns;
  const auto entries = read();
  for (const auto& e : entries) {
    if (e.event == "turn") turns.push_back(e);
  }
  for (const auto& e : entries) {
    if (e.event != "feedback") continue;
    for (auto& t : turns) {
      if (t.turn_index == e.turn_index) t.rating = e.rating;
    }
  }
  return turns;
}

}  // namespace modeltalk
