#include "modeltalk/respond.hpp"

#include <fmt/format.h>

#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <stdexcept>

#include "modeltalk/errors.hpp"
#include "modeltalk/grammar.hpp"
#include "modeltalk/text.hpp"

namespace modeltalk {

namespace {

using json = nlohmann::json;

struct TypeInfo {
  ResultType type;
  std::string_view name;
  std::vector<std::string> placeholders;
};

const std::vector<TypeInfo>& type_table() {
  using R = ResultType;
  static const std::vector<TypeInfo> table = {
      {R::show, "show", {"count", "total", "page", "instances"}},
      {R::empty_selection, "empty_selection", {"op"}},
      {R::countdata, "countdata", {"count"}},
      {R::label, "label", {"total", "distribution"}},
      {R::predict, "predict", {"subject", "label"}},
      {R::predict_distribution, "predict_distribution", {"total", "distribution"}},
      {R::likelihood, "likelihood", {"subject", "label", "probabilities"}},
      {R::mistakes_count, "mistakes_count", {"count", "total", "rate"}},
      {R::mistakes_sample, "mistakes_sample", {"count", "total", "shown", "instances"}},
      {R::no_mistakes, "no_mistakes", {"total"}},
      {R::score, "score", {"metric", "value", "total"}},
      {R::data, "data", {"text"}},
      {R::model, "model", {"text"}},
      {R::function, "function", {"categories"}},
      {R::self, "self", {}},
      {R::nlpattribute, "nlpattribute", {"subject", "label", "count", "tokens", "verbal"}},
      {R::nlpattribute_sentence, "nlpattribute_sentence", {"subject", "label", "count", "sentences"}},
      {R::globaltopk, "globaltopk", {"number", "ranking"}},
      {R::globaltopk_none, "globaltopk_none", {"number"}},
      {R::nlpcfe, "nlpcfe", {"subject", "original", "count", "counterfactuals"}},
      {R::nlpcfe_none, "nlpcfe_none", {"subject", "original"}},
      {R::adversarial, "adversarial", {"subject", "gold", "label", "text", "substitutions"}},
      {R::adversarial_failed, "adversarial_failed", {"subject", "gold", "substitutions"}},
      {R::adversarial_misclassified, "adversarial_misclassified", {"subject", "gold", "label"}},
      {R::augment, "augment", {"subject", "text", "label", "original", "replaced"}},
      {R::augment_none, "augment_none", {"subject"}},
      {R::rationalize, "rationalize", {"subject", "label", "rationale"}},
      {R::keywords, "keywords", {"number", "keywords"}},
      {R::similar, "similar", {"subject", "count", "instances"}},
      {R::similar_none, "similar_none", {"subject"}},
      {R::greeting, "greeting", {}},
      {R::acknowledgment, "acknowledgment", {}},
      {R::farewell, "farewell", {}},
      {R::clarify_intent, "clarify_intent", {"options"}},
      {R::clarify_id, "clarify_id", {"task"}},
      {R::clarify_slot, "clarify_slot", {"slot", "op"}},
      {R::clarify_invalid, "clarify_invalid", {"reason"}},
      {R::clarify_abandon, "clarify_abandon", {}},
      {R::unsupported_custom_input, "unsupported_custom_input", {"op", "supported"}},
      {R::unrecognized, "unrecognized", {}},
      {R::error, "error", {"message"}},
  };
  return table;
}

const TypeInfo& info(ResultType type) {
  for (const auto& t : type_table()) {
    if (t.type == type) return t;
  }
  throw std::logic_error("unregistered result type");
}

const std::regex& placeholder_pattern() {
  static const std::regex re(R"(\{([a-z_]+)\})");
  return re;
}

std::string subject_phrase(const json& payload) {
  if (!payload.contains("subject")) return "the selection";
  const auto& s = payload["subject"];
  if (s.contains("id")) return fmt::format("instance {}", s["id"].get<long long>());
  return "your custom input";
}

std::string list_phrase(const std::vector<std::string>& items) {
  if (items.empty()) return "";
  if (items.size() == 1) return items[0];
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += items[i];
  }
  return out + " and " + items.back();
}

std::string bold(std::string_view s) { return "**" + escape_markup(s) + "**"; }

std::string distribution_phrase(const json& dist) {
  std::vector<std::string> parts;
  for (const auto& d : dist) {
    parts.push_back(fmt::format("{}: {} ({})", d["label"].get<std::string>(),
                                d["count"].get<std::size_t>(),
                                format_percent(d["fraction"].get<double>())));
  }
  return list_phrase(parts);
}

std::string instance_lines(const json& instances) {
  std::string out;
  for (const auto& inst : instances) {
    if (!out.empty()) out += "\n";
    out += fmt::format("- id {}", inst["id"].get<long long>());
    if (inst.contains("gold")) out += fmt::format(" (gold {}", inst["gold"].get<std::string>());
    if (inst.contains("predicted")) {
      out += fmt::format(", predicted {}", inst["predicted"].get<std::string>());
    }
    if (inst.contains("gold")) out += ")";
    if (inst.contains("cosine")) {
      out += fmt::format(" [cosine {:.2f}]", inst["cosine"].get<double>());
    }
    out += ": " + escape_markup(inst["text"].get<std::string>());
  }
  return out;
}

std::map<std::string, std::string> values_for(const OperationResult& r) {
  using R = ResultType;
  const auto& p = r.payload;
  std::map<std::string, std::string> v;
  auto str = [&](const char* key) { return escape_markup(p.at(key).get<std::string>()); };
  auto num = [&](const char* key) { return std::to_string(p.at(key).get<long long>()); };
  if (p.contains("subject")) v["subject"] = subject_phrase(p);

  switch (r.type) {
    case R::show:
      v["count"] = std::to_string(p["instances"].size());
      v["total"] = num("total");
      v["page"] = std::to_string(p["page"].get<long long>() + 1);
      v["instances"] = instance_lines(p["instances"]);
      break;
    case R::empty_selection:
      v["op"] = str("op");
      break;
    case R::countdata:
      v["count"] = num("count");
      break;
    case R::label:
    case R::predict_distribution:
      v["total"] = num("total");
      v["distribution"] = distribution_phrase(p["distribution"]);
      break;
    case R::predict:
      v["label"] = bold(p["label"].get<std::string>());
      break;
    case R::likelihood: {
      v["label"] = bold(p["label"].get<std::string>());
      std::vector<std::string> parts;
      for (const auto& c : p["probabilities"]) {
        parts.push_back(fmt::format("{} {}", c["label"].get<std::string>(),
                                    format_percent(c["probability"].get<double>())));
      }
      v["probabilities"] = list_phrase(parts);
      break;
    }
    case R::mistakes_count: {
      v["count"] = num("count");
      v["total"] = num("total");
      const auto total = p["total"].get<double>();
      v["rate"] = format_percent(total > 0 ? p["count"].get<double>() / total : 0.0);
      break;
    }
    case R::mistakes_sample:
      v["count"] = num("count");
      v["total"] = num("total");
      v["shown"] = std::to_string(p["instances"].size());
      v["instances"] = instance_lines(p["instances"]);
      break;
    case R::no_mistakes:
      v["total"] = num("total");
      break;
    case R::score:
      v["metric"] = str("metric");
      v["value"] = format_percent(p["value"].get<double>());
      v["total"] = num("total");
      break;
    case R::data:
    case R::model:
      v["text"] = str("text");
      break;
    case R::function: {
      std::vector<std::string> lines;
      std::map<std::string, std::vector<std::string>> by_category;
      std::vector<std::string> order;
      for (const auto& sig : registry()) {
        auto cat = std::string(to_string(sig.category));
        if (!by_category.contains(cat)) order.push_back(cat);
        by_category[cat].push_back(sig.name);
      }
      std::string text;
      for (const auto& cat : order) {
        if (!text.empty()) text += "\n";
        text += fmt::format("- {}: {}", cat, join(by_category[cat], ", "));
      }
      v["categories"] = text;
      break;
    }
    case R::nlpattribute: {
      v["label"] = bold(p["label"].get<std::string>());
      std::vector<std::string> words;
      for (auto idx : p["top"]) {
        words.push_back(bold(p["tokens"][idx.get<std::size_t>()]["token"].get<std::string>()));
      }
      v["count"] = std::to_string(words.size());
      v["tokens"] = list_phrase(words);
      std::string verbal;
      for (const auto& s : p["verbalization"]) verbal += " " + s.get<std::string>();
      v["verbal"] = verbal;
      break;
    }
    case R::nlpattribute_sentence: {
      v["label"] = bold(p["label"].get<std::string>());
      std::string lines;
      for (auto idx : p["top"]) {
        const auto& s = p["sentences"][idx.get<std::size_t>()];
        if (!lines.empty()) lines += "\n";
        lines += fmt::format("- sentence {} (score {:.2f}): {}", s["index"].get<std::size_t>() + 1,
                             s["score"].get<double>(), escape_markup(s["text"].get<std::string>()));
      }
      v["count"] = std::to_string(p["top"].size());
      v["sentences"] = lines;
      break;
    }
    case R::globaltopk: {
      v["number"] = num("number");
      std::string lines;
      for (const auto& c : p["classes"]) {
        std::vector<std::string> words;
        for (const auto& t : c["tokens"]) words.push_back(bold(t["token"].get<std::string>()));
        if (!lines.empty()) lines += "\n";
        lines += fmt::format("- {}: {}", escape_markup(c["label"].get<std::string>()),
                             words.empty() ? std::string("none") : list_phrase(words));
      }
      v["ranking"] = lines;
      break;
    }
    case R::globaltopk_none:
      v["number"] = num("number");
      break;
    case R::nlpcfe: {
      v["original"] = bold(p["original"].get<std::string>());
      std::string lines;
      for (const auto& e : p["results"]) {
        if (!lines.empty()) lines += "\n";
        lines += fmt::format("- \"{}\" is predicted as **{}** ({})",
                             e["marked"].get<std::string>(), escape_markup(e["label"].get<std::string>()),
                             format_percent(e["probability"].get<double>()));
      }
      v["count"] = std::to_string(p["results"].size());
      v["counterfactuals"] = lines;
      break;
    }
    case R::nlpcfe_none:
      v["original"] = bold(p["original"].get<std::string>());
      break;
    case R::adversarial:
      v["gold"] = bold(p["gold"].get<std::string>());
      v["label"] = bold(p["example"]["label"].get<std::string>());
      v["text"] = p["example"]["marked"].get<std::string>();
      v["substitutions"] = std::to_string(p["example"]["edits"].size());
      break;
    case R::adversarial_failed:
      v["gold"] = bold(p["gold"].get<std::string>());
      v["substitutions"] = num("substitutions_tried");
      break;
    case R::adversarial_misclassified:
      v["gold"] = bold(p["gold"].get<std::string>());
      v["label"] = bold(p["label"].get<std::string>());
      break;
    case R::augment:
      v["text"] = p["example"]["marked"].get<std::string>();
      v["label"] = bold(p["example"]["label"].get<std::string>());
      v["original"] = bold(p["original"].get<std::string>());
      v["replaced"] = std::to_string(p["example"]["edits"].size());
      break;
    case R::augment_none:
      break;
    case R::rationalize:
      v["label"] = bold(p["label"].get<std::string>());
      // Built-in rationales carry their own bold markers.
      v["rationale"] = p["external"].get<bool>() ? escape_markup(p["rationale"].get<std::string>())
                                                 : p["rationale"].get<std::string>();
      break;
    case R::keywords: {
      v["number"] = std::to_string(p["keywords"].size());
      std::vector<std::string> parts;
      for (const auto& k : p["keywords"]) {
        parts.push_back(fmt::format("{} ({})", bold(k["token"].get<std::string>()),
                                    k["count"].get<std::size_t>()));
      }
      v["keywords"] = list_phrase(parts);
      break;
    }
    case R::similar:
      v["count"] = std::to_string(p["instances"].size());
      v["instances"] = instance_lines(p["instances"]);
      break;
    case R::similar_none:
      break;
    case R::clarify_intent: {
      std::vector<std::string> parts;
      for (const auto& c : p["candidates"]) {
        parts.push_back(fmt::format("{} ({})", bold(c["intent"].get<std::string>()),
                                    c["description"].get<std::string>()));
      }
      std::string joined;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) joined += i + 1 == parts.size() ? " or " : ", ";
        joined += parts[i];
      }
      v["options"] = joined;
      break;
    }
    case R::clarify_id:
      v["task"] = str("task");
      break;
    case R::clarify_slot:
      v["slot"] = str("slot");
      v["op"] = str("intent");
      break;
    case R::clarify_invalid:
      v["reason"] = str("reason");
      break;
    case R::unsupported_custom_input: {
      v["op"] = str("intent");
      std::vector<std::string> ops;
      for (const auto& s : p["supported"]) ops.push_back(bold(s.get<std::string>()));
      v["supported"] = list_phrase(ops);
      break;
    }
    case R::error:
      v["message"] = str("message");
      break;
    case R::self:
    case R::greeting:
    case R::acknowledgment:
    case R::farewell:
    case R::clarify_abandon:
    case R::unrecognized:
      break;
  }
  return v;
}

bool is_clarification(ResultType t) {
  using R = ResultType;
  return t == R::clarify_intent || t == R::clarify_id || t == R::clarify_slot ||
         t == R::clarify_invalid;
}

bool is_no_result(ResultType t) {
  using R = ResultType;
  return t == R::empty_selection || t == R::globaltopk_none || t == R::nlpcfe_none ||
         t == R::adversarial_failed || t == R::augment_none || t == R::similar_none;
}

}  // namespace

std::string_view to_string(ResultType type) { return info(type).name; }

std::optional<ResultType> parse_result_type(std::string_view name) {
  for (const auto& t : type_table()) {
    if (t.name == name) return t.type;
  }
  return std::nullopt;
}

const std::vector<ResultType>& all_result_types() {
  static const std::vector<ResultType> all = [] {
    std::vector<ResultType> v;
    for (const auto& t : type_table()) v.push_back(t.type);
    return v;
  }();
  return all;
}

const std::vector<std::string>& placeholders_of(ResultType type) {
  return info(type).placeholders;
}

OperationResult make_result(ResultType type, nlohmann::json payload) {
  payload["type"] = std::string(to_string(type));
  return {type, std::move(payload)};
}

nlohmann::json TurnResponse::to_json() const {
  return {{"text", text},
          {"payload", payload},
          {"parse", parse},
          {"flags",
           {{"fallback_used", fallback_used},
            {"clarification", clarification},
            {"no_result", no_result}}}};
}

void TemplateRegistry::add(ResultType type, std::vector<std::string> variants) {
  const auto& allowed = placeholders_of(type);
  if (variants.empty()) {
    throw LoadError(fmt::format("no templates for '{}'", to_string(type)));
  }
  if ((type == ResultType::function || type == ResultType::self) && variants.size() != 1) {
    throw LoadError(fmt::format("'{}' takes exactly one template", to_string(type)));
  }
  for (const auto& t : variants) {
    for (std::sregex_iterator it(t.begin(), t.end(), placeholder_pattern()), end; it != end; ++it) {
      const auto name = (*it)[1].str();
      if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
        throw LoadError(fmt::format("template for '{}' uses unknown placeholder {{{}}}",
                                    to_string(type), name));
      }
    }
  }
  templates_[type] = std::move(variants);
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
  TemplateRegistry reg;
  for (auto type : all_result_types()) {
    const auto path = dir / (std::string(to_string(type)) + ".txt");
    std::ifstream in(path);
    if (!in) throw LoadError("missing template file " + path.string());
    std::vector<std::string> variants;
    std::string line;
    while (std::getline(in, line)) {
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      // "\n" inside a template line is a line break.
      std::string v;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '\\' && i + 1 < t.size() && t[i + 1] == 'n') {
          v += '\n';
          ++i;
        } else {
          v += t[i];
        }
      }
      variants.push_back(std::move(v));
    }
    reg.add(type, std::move(variants));
  }
  return reg;
}

const std::vector<std::string>& TemplateRegistry::variants(ResultType type) const {
  auto it = templates_.find(type);
  if (it == templates_.end()) {
    throw std::logic_error(fmt::format("no template registered for '{}'", to_string(type)));
  }
  return it->second;
}

bool TemplateRegistry::complete() const {
  return std::all_of(all_result_types().begin(), all_result_types().end(),
                     [&](ResultType t) { return templates_.contains(t); });
}

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string format_percent(double fraction) { return fmt::format("{:.2f}%", fraction * 100.0); }

std::string escape_markup(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '*' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

bool bold_balanced(std::string_view text) {
  bool open = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\') {
      ++i;
    } else if (text[i] == '*' && i + 1 < text.size() && text[i + 1] == '*') {
      open = !open;
      ++i;
    }
  }
  return !open;
}

Responder::Responder(TemplateRegistry templates) : templates_(std::move(templates)) {
  if (!templates_.complete()) throw LoadError("template registry is incomplete");
}

TurnResponse Responder::render(const OperationResult& result, std::uint64_t seed) const {
  const auto& pool = templates_.variants(result.type);
  std::mt19937_64 rng(seed);
  const auto& tmpl = pool[uniform_below(rng, pool.size())];
  TurnResponse r;
  r.text = fill_template(tmpl, values_for(result));
  r.payload = result.payload;
  r.clarification = is_clarification(result.type);
  r.no_result = is_no_result(result.type);
  r.fallback_used = result.type == ResultType::unrecognized ||
                    (result.type == ResultType::rationalize &&
                     result.payload.value("fallback", false));
  return r;
}

TurnResponse Responder::render_about(ResultType kind) const {
  if (kind != ResultType::function && kind != ResultType::self) {
    throw ArgumentError("render_about takes function or self");
  }
  return render(make_result(kind), 0);
}

}  // namespace modeltalk
