#include "modeltalk/data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "modeltalk/errors.hpp"
#include "modeltalk/model.hpp"

namespace modeltalk {

using nlohmann::json;

std::string Instance::text() const {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out += ' ';
      out += kFieldSeparator;
      out += ' ';
    }
    out += fields[i].second;
  }
  return out;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::dev: return "dev";
    case SplitTag::test: return "test";
  }
  return "test";
}

std::optional<SplitTag> parse_split_tag(std::string_view s) {
  if (s == "train") return SplitTag::train;
  if (s == "dev") return SplitTag::dev;
  if (s == "test") return SplitTag::test;
  return std::nullopt;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

DatasetConfig DatasetConfig::from_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw LoadError("malformed dataset config " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  DatasetConfig cfg;
  try {
    cfg.name = j.at("name").get<std::string>();
    cfg.class_names = j.at("class_names").get<std::vector<std::string>>();
    cfg.field_order = j.value("fields", std::vector<std::string>{"text"});
    auto tag = j.value("split_tag", std::string("test"));
    auto parsed = parse_split_tag(tag);
    if (!parsed) throw LoadError("unknown split_tag '" + tag + "'");
    cfg.split_tag = *parsed;
    cfg.data_path = resolve(j.at("data").get<std::string>());
    if (j.contains("datasheet")) cfg.datasheet_path = resolve(j["datasheet"]);
    if (j.contains("model_card")) cfg.model_card_path = resolve(j["model_card"]);
    if (j.contains("label_aliases")) {
      cfg.label_aliases =
          j["label_aliases"].get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw LoadError("invalid dataset config " + path.string() + ": " + e.what());
  }
  return cfg;
}

Dataset::Dataset(std::string name, std::vector<std::string> class_names,
                 std::vector<Instance> instances, SplitTag split_tag)
    : name_(std::move(name)),
      class_names_(std::move(class_names)),
      instances_(std::move(instances)),
      split_tag_(split_tag) {
  if (class_names_.empty()) throw ArgumentError("class_names must be non-empty");
  std::set<std::string> distinct(class_names_.begin(), class_names_.end());
  if (distinct.size() != class_names_.size()) {
    throw ArgumentError("class_names must be distinct");
  }
  std::sort(instances_.begin(), instances_.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto& inst = instances_[i];
    if (inst.id < 0) throw ArgumentError("instance ids must be non-negative");
    if (inst.fields.empty()) {
      throw ArgumentError(fmt::format("instance {} has no text field", inst.id));
    }
    if (inst.gold_label >= class_names_.size()) {
      throw ArgumentError(fmt::format("instance {} has label index {} out of range",
                                      inst.id, inst.gold_label));
    }
    if (!index_.emplace(inst.id, i).second) {
      throw ArgumentError(fmt::format("duplicate id {}", inst.id));
    }
  }
}

const Instance* Dataset::find(InstanceId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &instances_[it->second];
}

const Instance& Dataset::at(InstanceId id) const {
  if (const auto* inst = find(id)) return *inst;
  throw ArgumentError(fmt::format("no instance with id {}", id));
}

std::optional<std::size_t> Dataset::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < class_names_.size(); ++i) {
    if (class_names_[i] == name) return i;
  }
  return std::nullopt;
}

Dataset load_dataset(const std::filesystem::path& path,
                     const DatasetConfig& config) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset " + path.string());
  if (config.class_names.empty()) throw LoadError("config has no class_names");

  std::vector<Instance> instances;
  std::set<InstanceId> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Instance inst;
    std::string label;
    try {
      auto j = json::parse(line);
      inst.id = j.at("id").get<InstanceId>();
      const auto& fields = j.at("fields");
      if (!fields.is_object()) throw LoadError("'fields' must be an object");
      std::vector<std::string> order = config.field_order;
      if (order.empty()) {
        for (auto it = fields.begin(); it != fields.end(); ++it) {
          order.push_back(it.key());
        }
      }
      for (const auto& name : order) {
        if (!fields.contains(name)) {
          throw LoadError("missing field '" + name + "'");
        }
        inst.fields.emplace_back(name, fields.at(name).get<std::string>());
      }
      label = j.at("label").get<std::string>();
    } catch (const json::exception& e) {
      throw LoadError(fmt::format("malformed record at line {}: {}", line_no,
                                  e.what()));
    } catch (const LoadError& e) {
      throw LoadError(fmt::format("malformed record at line {}: {}", line_no,
                                  e.what()));
    }
    if (inst.id < 0) {
      throw LoadError(fmt::format("negative id at line {}", line_no));
    }
    auto it = std::find(config.class_names.begin(), config.class_names.end(),
                        label);
    if (it == config.class_names.end()) {
      throw LoadError(fmt::format("unknown label '{}' at line {}", label, line_no));
    }
    inst.gold_label = static_cast<std::size_t>(it - config.class_names.begin());
    if (!seen.insert(inst.id).second) {
      throw LoadError(fmt::format("duplicate id {} at line {}", inst.id, line_no));
    }
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) throw LoadError("dataset has zero instances");

  try {
    Dataset ds(config.name, config.class_names, std::move(instances),
               config.split_tag);
    if (config.datasheet_path && std::filesystem::exists(*config.datasheet_path)) {
      ds.set_datasheet(read_file(*config.datasheet_path));
    }
    if (config.model_card_path &&
        std::filesystem::exists(*config.model_card_path)) {
      ds.set_model_card(read_file(*config.model_card_path));
    }
    ds.set_label_aliases(config.label_aliases);
    return ds;
  } catch (const ArgumentError& e) {
    throw LoadError(e.what());
  }
}

Dataset load_dataset(const DatasetConfig& config) {
  return load_dataset(config.data_path, config);
}

Selection select_all(const Dataset& dataset) {
  Selection sel{dataset.name(), {}};
  sel.ids.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) sel.ids.push_back(inst.id);
  return sel;
}

Selection filter_id(const Selection& sel, InstanceId id) {
  Selection out{sel.dataset, {}};
  if (std::find(sel.ids.begin(), sel.ids.end(), id) != sel.ids.end()) {
    out.ids.push_back(id);
  }
  return out;
}

Selection filter_includes(const Dataset& dataset, const Selection& sel,
                          std::string_view token) {
  auto needle = to_lower(trim(token));
  if (needle.empty()) throw ArgumentError("includes needs a non-empty token");
  Selection out{sel.dataset, {}};
  for (auto id : sel.ids) {
    const auto* inst = dataset.find(id);
    if (!inst) continue;
    if (tokenize(inst->text()).counts.contains(needle)) out.ids.push_back(id);
  }
  return out;
}

Selection filter_substring(const Dataset& dataset, const Selection& sel,
                           std::string_view query) {
  auto needle = to_lower(trim(query));
  if (needle.empty()) return sel;
  Selection out{sel.dataset, {}};
  for (auto id : sel.ids) {
    const auto* inst = dataset.find(id);
    if (!inst) continue;
    for (const auto& [name, text] : inst->fields) {
      if (to_lower(text).find(needle) != std::string::npos) {
        out.ids.push_back(id);
        break;
      }
    }
  }
  return out;
}

Selection unite(const Selection& a, const Selection& b) {
  std::set<InstanceId> ids(a.ids.begin(), a.ids.end());
  ids.insert(b.ids.begin(), b.ids.end());
  return Selection{a.dataset.empty() ? b.dataset : a.dataset,
                   std::vector<InstanceId>(ids.begin(), ids.end())};
}

ShowPage show(const Dataset& dataset, const Selection& sel, std::size_t page,
              std::size_t page_size) {
  ShowPage out;
  out.page = page;
  out.total = sel.size();
  if (page_size == 0) return out;
  const std::size_t begin = page * page_size;
  if (begin >= sel.size()) return out;
  const std::size_t end = std::min(sel.size(), begin + page_size);
  for (std::size_t i = begin; i < end; ++i) {
    if (const auto* inst = dataset.find(sel.ids[i])) out.instances.push_back(inst);
  }
  return out;
}

std::vector<ClassShare> label_distribution(const Dataset& dataset,
                                           const Selection& sel) {
  if (sel.empty()) return {};
  std::vector<std::size_t> counts(dataset.num_classes(), 0);
  for (auto id : sel.ids) ++counts[dataset.at(id).gold_label];
  std::vector<ClassShare> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out.push_back({dataset.class_names()[c], counts[c],
                   static_cast<double>(counts[c]) /
                       static_cast<double>(sel.size())});
  }
  return out;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"accuracy", "precision",
                                                 "recall", "f1"};
  return names;
}

std::string_view to_string(Metric m) {
  return metric_names()[static_cast<std::size_t>(m)];
}

Metric parse_metric(std::string_view name) {
  const auto& names = metric_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Metric>(i);
  }
  throw ArgumentError(fmt::format("unknown metric '{}'; valid metrics: {}", name,
                                  join(names, ", ")));
}

std::optional<double> score(const Dataset& dataset, const Selection& sel,
                            const LinearTextModel& model, Metric metric) {
  if (sel.empty()) return std::nullopt;
  const std::size_t classes = dataset.num_classes();
  // confusion[gold][pred]
  std::vector<std::vector<std::size_t>> confusion(
      classes, std::vector<std::size_t>(classes, 0));
  for (auto id : sel.ids) {
    const auto& inst = dataset.at(id);
    ++confusion[inst.gold_label][model.predict(std::string_view(inst.text())).index];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c) correct += confusion[c][c];
  if (metric == Metric::accuracy) {
    // Written as 1 - mistakes/N so the two views agree bit-for-bit.
    return 1.0 - static_cast<double>(sel.size() - correct) / static_cast<double>(sel.size());
  }

  double total = 0.0;
  std::size_t active = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = confusion[c][c], gold = 0, predicted = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      gold += confusion[c][k];
      predicted += confusion[k][c];
    }
    if (gold == 0 && predicted == 0) continue;
    ++active;
    const double precision =
        predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double recall =
        gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    switch (metric) {
      case Metric::precision: total += precision; break;
      case Metric::recall: total += recall; break;
      case Metric::f1:
        total += (precision + recall) > 0.0
                     ? 2.0 * precision * recall / (precision + recall)
                     : 0.0;
        break;
      case Metric::accuracy: break;
    }
  }
  return total / static_cast<double>(active);
}

MistakesReport mistakes(const Dataset& dataset, const Selection& sel,
                        const LinearTextModel& model, MistakeMode mode,
                        std::size_t n) {
  MistakesReport report;
  report.total = sel.size();
  std::vector<InstanceId> wrong;
  for (auto id : sel.ids) {
    const auto& inst = dataset.at(id);
    if (model.predict(std::string_view(inst.text())).index != inst.gold_label) {
      wrong.push_back(id);
    }
  }
  std::sort(wrong.begin(), wrong.end());
  report.count = wrong.size();
  if (mode == MistakeMode::sample) {
    if (wrong.size() > n) wrong.resize(n);
    report.sample = std::move(wrong);
  }
  return report;
}

std::string describe_metadata(const Dataset& dataset,
                              const LinearTextModel* model, MetadataKind kind) {
  const auto& card =
      kind == MetadataKind::data ? dataset.datasheet() : dataset.model_card();
  if (card) return std::string(trim(*card));
  return fmt::format("{} instances, {} classes, vocab {}", dataset.size(),
                     dataset.num_classes(),
                     model ? model->vocabulary_size() : std::size_t{0});
}

}  // namespace modeltalk
