#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace modeltalk {

class LinearTextModel;

using InstanceId = std::int64_t;

struct Instance {
  InstanceId id = 0;
  // Ordered (field name, text) pairs.
  std::vector<std::pair<std::string, std::string>> fields;
  std::size_t gold_label = 0;

  // Fields joined with " [SEP] ": the model input text.
  std::string text() const;
};

enum class SplitTag { train, dev, test };

std::string_view to_string(SplitTag tag);
std::optional<SplitTag> parse_split_tag(std::string_view s);

struct DatasetConfig {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<std::string> field_order;
  SplitTag split_tag = SplitTag::test;
  std::filesystem::path data_path;
  std::optional<std::filesystem::path> datasheet_path;
  std::optional<std::filesystem::path> model_card_path;
  // Task vocabulary users say instead of label strings ("hate speech").
  std::map<std::string, std::string> label_aliases;

  // Relative paths resolve against the config file's directory.
  static DatasetConfig from_file(const std::filesystem::path& path);
};

class Dataset {
 public:
  Dataset(std::string name, std::vector<std::string> class_names,
          std::vector<Instance> instances, SplitTag split_tag = SplitTag::test);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return class_names_.size(); }
  SplitTag split_tag() const { return split_tag_; }
  // Instances in ascending id order.
  const std::vector<Instance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }

  const Instance* find(InstanceId id) const;
  const Instance& at(InstanceId id) const;
  bool contains(InstanceId id) const { return find(id) != nullptr; }
  std::optional<std::size_t> class_index(std::string_view name) const;

  const std::optional<std::string>& datasheet() const { return datasheet_; }
  const std::optional<std::string>& model_card() const { return model_card_; }
  const std::map<std::string, std::string>& label_aliases() const {
    return label_aliases_;
  }

  void set_datasheet(std::string text) { datasheet_ = std::move(text); }
  void set_model_card(std::string text) { model_card_ = std::move(text); }
  void set_label_aliases(std::map<std::string, std::string> aliases) {
    label_aliases_ = std::move(aliases);
  }

 private:
  std::string name_;
  std::vector<std::string> class_names_;
  std::vector<Instance> instances_;
  std::unordered_map<InstanceId, std::size_t> index_;
  SplitTag split_tag_;
  std::optional<std::string> datasheet_;
  std::optional<std::string> model_card_;
  std::map<std::string, std::string> label_aliases_;
};

// Throws LoadError naming the offending line.
Dataset load_dataset(const std::filesystem::path& path,
                     const DatasetConfig& config);
Dataset load_dataset(const DatasetConfig& config);

struct Selection {
  std::string dataset;
  std::vector<InstanceId> ids;

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
  bool operator==(const Selection&) const = default;
};

Selection select_all(const Dataset& dataset);
Selection filter_id(const Selection& sel, InstanceId id);
// Whole-word, case-insensitive token match over all fields.
Selection filter_includes(const Dataset& dataset, const Selection& sel,
                          std::string_view token);
// Ascending-id union, used by `or` chains.
Selection unite(const Selection& a, const Selection& b);
// Case-insensitive substring search, used by the dataset viewer.
Selection filter_substring(const Dataset& dataset, const Selection& sel,
                           std::string_view query);

struct ShowPage {
  std::vector<const Instance*> instances;
  std::size_t page = 0;
  std::size_t total = 0;
};

inline constexpr std::size_t kDefaultPageSize = 10;

ShowPage show(const Dataset& dataset, const Selection& sel, std::size_t page,
              std::size_t page_size = kDefaultPageSize);

inline std::size_t countdata(const Selection& sel) { return sel.size(); }

struct ClassShare {
  std::string label;
  std::size_t count = 0;
  double fraction = 0.0;
};

// Empty for an empty selection; callers verbalize "no instances match".
std::vector<ClassShare> label_distribution(const Dataset& dataset,
                                           const Selection& sel);

enum class Metric { accuracy, precision, recall, f1 };

std::string_view to_string(Metric m);
// Throws ArgumentError listing the valid names.
Metric parse_metric(std::string_view name);
const std::vector<std::string>& metric_names();

// Macro-averaged over the classes occurring in gold or predicted labels.
// nullopt for an empty selection.
std::optional<double> score(const Dataset& dataset, const Selection& sel,
                            const LinearTextModel& model, Metric metric);

enum class MistakeMode { count, sample };

struct MistakesReport {
  std::size_t count = 0;
  std::size_t total = 0;
  // Misclassified ids in ascending order, truncated to n in sample mode.
  std::vector<InstanceId> sample;
};

MistakesReport mistakes(const Dataset& dataset, const Selection& sel,
                        const LinearTextModel& model, MistakeMode mode,
                        std::size_t n = 3);

enum class MetadataKind { data, model };

// Datasheet / model card verbatim, or an auto summary when absent.
std::string describe_metadata(const Dataset& dataset,
                              const LinearTextModel* model, MetadataKind kind);

}  // namespace modeltalk
