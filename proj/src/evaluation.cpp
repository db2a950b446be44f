#include "modeltalk/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "modeltalk/errors.hpp"
#include "modeltalk/grammar.hpp"
#include "modeltalk/text.hpp"

namespace modeltalk {

namespace {

using json = nlohmann::json;

std::string fmt2(std::optional<double> v) {
  return v ? fmt::format("{:.2f}", *v) : std::string("undefined");
}

json opt_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::vector<GoldPair> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open gold file " + path.string());
  std::vector<GoldPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3) {
      throw LoadError(fmt::format("{}:{}: expected utterance<TAB>parse[<TAB>split]",
                                  path.string(), line_no));
    }
    GoldPair g;
    g.utterance = std::string(trim(cols[0]));
    g.line = line_no;
    const auto parse = std::string(trim(cols[1]));
    try {
      g.gold_parse = canonical_form(parse);
    } catch (const GrammarError& e) {
      throw LoadError(fmt::format("{}:{}: malformed gold parse: {}", path.string(), line_no, e.what()));
    }
    if (g.gold_parse != parse) {
      throw LoadError(fmt::format("{}:{}: gold parse is not canonical, expected \"{}\"",
                                  path.string(), line_no, g.gold_parse));
    }
    if (cols.size() == 3) {
      g.split = parse_split_tag(trim(cols[2]));
      if (!g.split) {
        throw LoadError(fmt::format("{}:{}: unknown split '{}'", path.string(), line_no, cols[2]));
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldPair> filter_split(const std::vector<GoldPair>& gold, SplitTag split) {
  std::vector<GoldPair> out;
  std::copy_if(gold.begin(), gold.end(), std::back_inserter(out),
               [&](const GoldPair& g) { return g.split == split; });
  return out;
}

UtteranceParser bank_parser(const IntentParser& parser, std::optional<InstanceRef> previous) {
  return [&parser, previous](std::string_view utterance) -> std::optional<std::string> {
    auto r = parser.parse(utterance, previous);
    if (auto* p = std::get_if<Parsed>(&r)) return p->parse;
    return std::nullopt;
  };
}

std::string action_of(std::string_view canonical_parse) {
  try {
    const auto tree = parse_string(canonical_parse);
    if (const auto* a = tree.action()) return std::string(to_string(a->op));
    return std::string(to_string(tree.clauses.back().op));
  } catch (const GrammarError&) {
    return "<invalid>";
  }
}

double ParsingReport::accuracy() const {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

ParsingReport eval_parsing(const std::vector<GoldPair>& gold, const UtteranceParser& parser) {
  if (gold.empty()) throw ArgumentError("gold set is empty");
  ParsingReport r;
  for (const auto& g : gold) {
    ParseOutcome o;
    o.utterance = g.utterance;
    o.gold = g.gold_parse;
    if (auto p = parser(g.utterance)) {
      try {
        o.predicted = canonical_form(*p);
      } catch (const GrammarError&) {
        o.predicted = *p;
      }
    }
    o.match = o.predicted == o.gold;
    auto& op = r.per_op[action_of(o.gold)];
    ++op.total;
    ++r.total;
    if (o.match) {
      ++op.correct;
      ++r.correct;
    } else {
      ++op.confusions[o.predicted.empty() ? std::string("<none>") : action_of(o.predicted)];
    }
    r.outcomes.push_back(std::move(o));
  }
  return r;
}

json ParsingReport::to_json() const {
  json ops = json::object();
  for (const auto& [name, b] : per_op) {
    ops[name] = {{"total", b.total},
                 {"correct", b.correct},
                 {"accuracy", 100.0 * static_cast<double>(b.correct) / static_cast<double>(b.total)},
                 {"confusions", b.confusions}};
  }
  json misses = json::array();
  for (const auto& o : outcomes) {
    if (!o.match) {
      misses.push_back({{"utterance", o.utterance}, {"gold", o.gold}, {"predicted", o.predicted}});
    }
  }
  return {{"total", total},
          {"correct", correct},
          {"accuracy", std::stod(fmt::format("{:.2f}", accuracy()))},
          {"per_operation", ops},
          {"misses", misses}};
}

std::string ParsingReport::to_markdown() const {
  std::string out = fmt::format("# Parsing accuracy\n\nExact match: {:.2f}% ({}/{})\n\n", accuracy(),
                                correct, total);
  out += "| operation | total | correct | accuracy | confused with |\n";
  out += "|---|---:|---:|---:|---|\n";
  for (const auto& [name, b] : per_op) {
    std::vector<std::string> conf;
    for (const auto& [other, n] : b.confusions) conf.push_back(fmt::format("{} ({})", other, n));
    out += fmt::format("| {} | {} | {} | {:.2f}% | {} |\n", name, b.total, b.correct,
                       100.0 * static_cast<double>(b.correct) / static_cast<double>(b.total),
                       join(conf, ", "));
  }
  return out;
}

SimulationRecord parse_simulation_record(const json& j) {
  SimulationRecord r;
  try {
    r.instance = j.at("instance_id").get<InstanceId>();
    r.prediction = j.at("prediction").get<std::string>();
    r.guess = j.at("guess").get<std::string>();
    for (const auto& [op, v] : j.at("ratings").items()) {
      const int rating = v.get<int>();
      if (rating < -1 || rating > 1) throw ArgumentError("rating out of range for " + op);
      r.ratings[op] = rating;
    }
    r.turns = j.value("turns", 1);
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed simulation record: ") + e.what());
  }
  if (r.turns < 1) throw LoadError("simulation record needs turns >= 1");
  return r;
}

std::vector<SimulationRecord> load_study_logs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw LoadError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SimulationRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw LoadError(fmt::format("{}:{}: {}", f.string(), line_no, e.what()));
      }
      if (j.value("type", "") != "simulation") continue;
      try {
        out.push_back(parse_simulation_record(j));
      } catch (const Error& e) {
        throw LoadError(fmt::format("{}:{}: {}", f.string(), line_no, e.what()));
      }
    }
  }
  return out;
}

std::optional<double> helpfulness_ratio(const std::vector<SimulationRecord>& records) {
  std::size_t helpful = 0, rated = 0;
  for (const auto& r : records) {
    for (const auto& [op, v] : r.ratings) {
      if (v == 0) continue;
      ++rated;
      if (v == 1) ++helpful;
    }
  }
  if (rated == 0) return std::nullopt;
  return static_cast<double>(helpful) / static_cast<double>(rated);
}

std::optional<double> sim_accuracy(const std::vector<SimulationRecord>& records,
                                   bool filter_helpful) {
  std::size_t num = 0, den = 0;
  for (const auto& r : records) {
    if (!filter_helpful) {
      ++den;
      if (r.correct()) ++num;
      continue;
    }
    for (const auto& [op, v] : r.ratings) {
      if (v != 1) continue;
      ++den;
      if (r.correct()) ++num;
    }
  }
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::map<std::string, double> turns_avg(const std::vector<SimulationRecord>& records) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    for (const auto& [op, v] : r.ratings) {
      auto& [sum, n] = acc[op];
      sum += r.turns;
      ++n;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [op, a] : acc) out[op] = a.first / static_cast<double>(a.second);
  return out;
}

StudyReport evaluate_study(const std::vector<SimulationRecord>& records) {
  StudyReport s;
  s.records = records.size();
  s.helpfulness = helpfulness_ratio(records);
  s.sim_all = sim_accuracy(records, false);
  s.sim_helpful = sim_accuracy(records, true);
  if (!records.empty()) {
    double sum = 0;
    for (const auto& r : records) sum += r.turns;
    s.turns_overall = sum / static_cast<double>(records.size());
  }
  s.turns_per_op = turns_avg(records);
  std::map<std::string, std::vector<SimulationRecord>> by_op;
  for (const auto& r : records) {
    for (const auto& [op, v] : r.ratings) {
      SimulationRecord one = r;
      one.ratings = {{op, v}};
      by_op[op].push_back(std::move(one));
    }
  }
  for (const auto& [op, recs] : by_op) s.helpfulness_per_op[op] = helpfulness_ratio(recs);
  return s;
}

json StudyReport::to_json() const {
  json ops = json::object();
  for (const auto& [op, t] : turns_per_op) {
    auto h = helpfulness_per_op.find(op);
    ops[op] = {{"turns_avg", t},
               {"helpfulness_ratio", h == helpfulness_per_op.end() ? json(nullptr) : opt_json(h->second)}};
  }
  return {{"records", records},
          {"helpfulness_ratio", opt_json(helpfulness)},
          {"sim_all", opt_json(sim_all)},
          {"sim_helpful", opt_json(sim_helpful)},
          {"turns_avg", opt_json(turns_overall)},
          {"per_operation", ops}};
}

std::string StudyReport::to_markdown() const {
  std::string out = "# Study metrics\n\n";
  out += fmt::format("Records: {}\n\n", records);
  out += "| metric | value |\n|---|---:|\n";
  out += fmt::format("| Helpfulness Ratio | {} |\n", fmt2(helpfulness));
  out += fmt::format("| Sim(all) | {} |\n", fmt2(sim_all));
  out += fmt::format("| Sim(t=1) | {} |\n", fmt2(sim_helpful));
  out += fmt::format("| avg turns | {} |\n", fmt2(turns_overall));
  if (!turns_per_op.empty()) {
    out += "\n| operation | helpfulness | avg turns |\n|---|---:|---:|\n";
    for (const auto& [op, t] : turns_per_op) {
      auto h = helpfulness_per_op.find(op);
      out += fmt::format("| {} | {} | {:.2f} |\n", op,
                         h == helpfulness_per_op.end() ? std::string("undefined") : fmt2(h->second), t);
    }
  }
  return out;
}

}  // namespace modeltalk
