#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "modeltalk/data.hpp"
#include "modeltalk/executor.hpp"
#include "modeltalk/intent.hpp"
#include "modeltalk/respond.hpp"

namespace modeltalk {

struct Turn {
  std::string ts;
  std::string utterance;
  // Canonical parse when one was executed.
  std::string parse;
  // execute | clarify | smalltalk | unsupported | unrecognized | error
  std::string action;
  TurnResponse response;
  std::optional<int> feedback;
};

struct PendingClarification {
  enum class Kind { ambiguous, missing_slot };
  Kind kind = Kind::ambiguous;
  std::string utterance;
  std::vector<IntentCandidate> candidates;
  MissingSlot missing;
  // Follow-ups that failed to answer; the second one abandons.
  int reasks = 0;
};

struct DialogueState {
  std::string conversation_id;
  std::vector<Turn> turns;
  std::optional<InstanceRef> last_instance;
  std::optional<PendingClarification> pending;
  std::optional<std::string> custom_input;
  std::optional<Selection> active_filter;
  bool finished = false;
  std::uint64_t seed = 0;

  explicit DialogueState(std::string id = "", std::uint64_t base_seed = 0);
};

struct DialogueAction {
  enum class Kind { execute, ask_clarification, smalltalk_reply, reply };
  Kind kind = Kind::reply;
  std::string parse;  // execute only
  // Result to render for everything but execute.
  std::optional<OperationResult> result;
};

class DialogueManager {
 public:
  DialogueManager(const IntentParser& parser, const Executor& executor,
                  const Responder& responder, ExternalParser* external = nullptr);

  // Decides what to do with an utterance and updates pending clarification
  // state. Does not execute anything.
  DialogueAction step(DialogueState& state, std::string_view utterance) const;

  // step + execute + render; appends the turn to state.turns.
  TurnResponse handle(DialogueState& state, std::string_view utterance) const;

  // Throws ArgumentError when the text is blank.
  void set_custom_input(DialogueState& state, std::string_view text) const;

  TurnResponse smalltalk_response(SmalltalkKind kind, std::uint64_t seed) const;

  const IntentParser& parser() const { return *parser_; }
  const Executor& executor() const { return *executor_; }

 private:
  DialogueAction from_parse_result(DialogueState& state, std::string_view utterance,
                                   ParseResult result) const;
  DialogueAction resolve_pending(DialogueState& state, std::string_view utterance) const;
  DialogueAction clarify_for(const MissingSlot& missing) const;

  const IntentParser* parser_;
  const Executor* executor_;
  const Responder* responder_;
  ExternalParser* external_;
};

// Phrase for the missing-id question, e.g. "a counterfactual" for nlpcfe.
std::string clarification_task(std::string_view intent);

// Turn log JSONL: one object per line, "event" is "turn", "custom_input" or
// "feedback". Feedback for a turn may repeat; the last rating wins.
class TurnLog {
 public:
  explicit TurnLog(std::filesystem::path path) : path_(std::move(path)) {}

  void append_turn(std::size_t index, const Turn& turn) const;
  void append_custom_input(std::string_view text) const;
  void append_feedback(std::size_t turn_index, int rating) const;

  struct Entry {
    std::string event;
    std::size_t turn_index = 0;
    std::string utterance;
    std::string parse;
    std::string text;  // custom input text or response text
    std::optional<int> rating;
  };
  std::vector<Entry> read() const;
  // Turns with the latest feedback applied.
  std::vector<Entry> turns() const;

  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const nlohmann::json& line) const;
  std::filesystem::path path_;
};

std::string utc_timestamp();

}  // namespace modeltalk
