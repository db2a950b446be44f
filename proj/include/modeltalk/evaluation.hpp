#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "modeltalk/data.hpp"
#include "modeltalk/intent.hpp"

namespace modeltalk {

struct GoldPair {
  std::string utterance;
  std::string gold_parse;  // canonical
  std::optional<SplitTag> split;
  std::size_t line = 0;
};

// TSV "utterance<TAB>parse[<TAB>split]", '#' comments. Throws LoadError
// naming the line for a malformed row or a non-canonical parse.
std::vector<GoldPair> load_gold(const std::filesystem::path& path);
std::vector<GoldPair> filter_split(const std::vector<GoldPair>& gold, SplitTag split);

// Returns the predicted canonical parse, or nullopt when the parser produced
// no parse (clarification, smalltalk, ...).
using UtteranceParser = std::function<std::optional<std::string>(std::string_view)>;

// Built-in parser with `previous` as the previously discussed instance.
UtteranceParser bank_parser(const IntentParser& parser,
                            std::optional<InstanceRef> previous = InstanceRef::of(kDummyId));

struct ParseOutcome {
  std::string utterance;
  std::string gold;
  std::string predicted;  // empty when no parse
  bool match = false;
};

struct OpBreakdown {
  std::size_t total = 0;
  std::size_t correct = 0;
  // Predicted action op -> count, for the misses.
  std::map<std::string, std::size_t> confusions;
};

struct ParsingReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<ParseOutcome> outcomes;
  // Keyed by the gold action op ("filter" for filter-only parses).
  std::map<std::string, OpBreakdown> per_op;

  // Percent.
  double accuracy() const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

// Throws ArgumentError on an empty gold set.
ParsingReport eval_parsing(const std::vector<GoldPair>& gold, const UtteranceParser& parser);

// Action op name of a canonical parse.
std::string action_of(std::string_view canonical_parse);

struct SimulationRecord {
  InstanceId instance = 0;
  std::string prediction;
  std::string guess;
  // Operation name -> rating in {-1, 0, 1}.
  std::map<std::string, int> ratings;
  int turns = 1;

  bool correct() const { return prediction == guess; }
};

SimulationRecord parse_simulation_record(const nlohmann::json& j);
// Every *.jsonl file of the directory, file name order; only lines with
// "type": "simulation" are records.
std::vector<SimulationRecord> load_study_logs(const std::filesystem::path& dir);

// count(r = 1) / count(r != 0); nullopt when every rating is 0.
std::optional<double> helpfulness_ratio(const std::vector<SimulationRecord>& records);
// Percent. Unfiltered: correct records over records. Filtered: over all
// ratings r = 1, the share whose record has a correct guess.
std::optional<double> sim_accuracy(const std::vector<SimulationRecord>& records,
                                   bool filter_helpful);
// Mean turns of the records that rated each operation; operations without
// records are absent.
std::map<std::string, double> turns_avg(const std::vector<SimulationRecord>& records);

struct StudyReport {
  std::size_t records = 0;
  std::optional<double> helpfulness;
  std::optional<double> sim_all;
  std::optional<double> sim_helpful;
  std::optional<double> turns_overall;
  std::map<std::string, double> turns_per_op;
  std::map<std::string, std::optional<double>> helpfulness_per_op;

  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

StudyReport evaluate_study(const std::vector<SimulationRecord>& records);

}  // namespace modeltalk
