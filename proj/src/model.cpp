#include "modeltalk/model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "modeltalk/errors.hpp"

namespace modeltalk {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
             nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

LinearTextModel::LinearTextModel(std::vector<std::string> vocabulary,
                                 std::vector<std::string> class_names,
                                 std::vector<std::vector<double>> weights,
                                 std::vector<double> biases, TrainConfig config)
    : vocabulary_(std::move(vocabulary)),
      class_names_(std::move(class_names)),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      config_(config) {
  if (class_names_.empty()) throw ArgumentError("model needs at least one class");
  if (weights_.size() != class_names_.size() ||
      biases_.size() != class_names_.size()) {
    throw ArgumentError("weights/biases do not match the class count");
  }
  for (const auto& row : weights_) {
    if (row.size() != vocabulary_.size()) {
      throw ArgumentError("weight vector length differs from vocabulary size");
    }
  }
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) {
      throw ArgumentError("duplicate vocabulary entry '" + vocabulary_[i] + "'");
    }
  }
  hash_ = sha256_hex(to_json());
}

std::optional<std::size_t> LinearTextModel::feature_index(
    std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SparseVector LinearTextModel::features(const TokenizedText& text) const {
  SparseVector x;
  for (const auto& [token, count] : text.counts) {
    if (auto f = feature_index(token)) x.emplace_back(*f, count);
  }
  std::sort(x.begin(), x.end());
  return x;
}

double LinearTextModel::logit(const SparseVector& x, std::size_t cls) const {
  double z = biases_[cls];
  for (const auto& [f, v] : x) z += weights_[cls][f] * v;
  return z;
}

std::vector<double> LinearTextModel::logits(const SparseVector& x) const {
  std::vector<double> z(num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = logit(x, c);
  return z;
}

std::vector<double> LinearTextModel::probabilities(const SparseVector& x) const {
  return softmax(logits(x));
}

Prediction LinearTextModel::predict(const SparseVector& x) const {
  auto idx = argmax(logits(x));
  return {class_names_[idx], idx};
}

Prediction LinearTextModel::predict(const TokenizedText& text) const {
  return predict(features(text));
}

Prediction LinearTextModel::predict(std::string_view text) const {
  return predict(tokenize(text));
}

std::vector<double> LinearTextModel::likelihood(std::string_view text) const {
  return probabilities(features(tokenize(text)));
}

SparseVector LinearTextModel::logit_gradient(const SparseVector& x,
                                             std::size_t cls) const {
  if (cls >= num_classes()) throw ArgumentError("class index out of range");
  SparseVector grad;
  grad.reserve(x.size());
  for (const auto& [f, v] : x) grad.emplace_back(f, weights_[cls][f]);
  return grad;
}

std::string LinearTextModel::to_json() const {
  json j;
  j["vocabulary"] = vocabulary_;
  j["class_names"] = class_names_;
  j["weights"] = weights_;
  j["biases"] = biases_;
  j["train_config"] = {{"learning_rate", config_.learning_rate},
                       {"epochs", config_.epochs},
                       {"l2", config_.l2},
                       {"seed", config_.seed}};
  return j.dump();
}

LinearTextModel LinearTextModel::from_json(std::string_view text) {
  try {
    auto j = json::parse(text);
    TrainConfig cfg;
    if (j.contains("train_config")) {
      const auto& t = j.at("train_config");
      cfg.learning_rate = t.value("learning_rate", cfg.learning_rate);
      cfg.epochs = t.value("epochs", cfg.epochs);
      cfg.l2 = t.value("l2", cfg.l2);
      cfg.seed = t.value("seed", cfg.seed);
    }
    LinearTextModel model(j.at("vocabulary").get<std::vector<std::string>>(),
                          j.at("class_names").get<std::vector<std::string>>(),
                          j.at("weights").get<std::vector<std::vector<double>>>(),
                          j.at("biases").get<std::vector<double>>(), cfg);
    if (j.contains("content_hash") &&
        j.at("content_hash").get<std::string>() != model.content_hash()) {
      throw LoadError("model content hash mismatch");
    }
    return model;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed model file: ") + e.what());
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("invalid model: ") + e.what());
  }
}

void LinearTextModel::save(const std::filesystem::path& path) const {
  auto j = json::parse(to_json());
  j["content_hash"] = hash_;
  std::ofstream out(path);
  if (!out) throw Error("cannot write model to " + path.string());
  out << j.dump() << '\n';
}

LinearTextModel LinearTextModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open model file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

namespace {

struct Design {
  std::vector<SparseVector> rows;
  std::vector<std::size_t> labels;
};

Design build_design(const Dataset& data,
                    const std::unordered_map<std::string, std::size_t>& index) {
  Design d;
  for (const auto& inst : data.instances()) {
    auto tt = tokenize(inst.text());
    SparseVector x;
    for (const auto& [tok, count] : tt.counts) {
      auto it = index.find(tok);
      if (it != index.end()) x.emplace_back(it->second, count);
    }
    std::sort(x.begin(), x.end());
    d.rows.push_back(std::move(x));
    d.labels.push_back(inst.gold_label);
  }
  return d;
}

double objective(const std::vector<std::vector<double>>& w,
                 const std::vector<double>& b, const Design& d, double l2) {
  const std::size_t classes = b.size();
  double loss = 0.0;
  std::vector<double> z(classes);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = b[c];
      for (const auto& [f, v] : d.rows[i]) z[c] += w[c][f] * v;
    }
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double zc : z) total += std::exp(zc - top);
    loss += top + std::log(total) - z[d.labels[i]];
  }
  loss /= static_cast<double>(d.rows.size());
  double norm = 0.0;
  for (const auto& row : w)
    for (double v : row) norm += v * v;
  return loss + 0.5 * l2 * norm;
}

}  // namespace

LinearTextModel train(const Dataset& train_set, const TrainConfig& config,
                      std::vector<double>* loss_history) {
  const std::size_t classes = train_set.num_classes();
  std::vector<std::size_t> per_class(classes, 0);
  for (const auto& inst : train_set.instances()) ++per_class[inst.gold_label];
  const auto populated = std::count_if(per_class.begin(), per_class.end(),
                                       [](std::size_t n) { return n > 0; });
  if (classes < 2 || populated < 2) {
    throw TrainingError("training needs at least two classes with instances");
  }
  if (config.epochs < 0) throw TrainingError("epochs must be non-negative");

  std::set<std::string> vocab_set;
  for (const auto& inst : train_set.instances()) {
    for (const auto& [tok, count] : tokenize(inst.text()).counts) {
      vocab_set.insert(tok);
    }
  }
  std::vector<std::string> vocabulary(vocab_set.begin(), vocab_set.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index[vocabulary[i]] = i;

  const Design design = build_design(train_set, index);
  const std::size_t features = vocabulary.size();
  const double n = static_cast<double>(design.rows.size());

  std::vector<std::vector<double>> w(classes, std::vector<double>(features, 0.0));
  std::vector<double> b(classes, 0.0);
  std::vector<std::vector<double>> gw(classes, std::vector<double>(features));
  std::vector<double> gb(classes);
  std::vector<double> z(classes);

  if (loss_history) loss_history->push_back(objective(w, b, design, config.l2));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t f = 0; f < features; ++f) gw[c][f] = config.l2 * w[c][f];
      gb[c] = 0.0;
    }
    for (std::size_t i = 0; i < design.rows.size(); ++i) {
      const auto& x = design.rows[i];
      for (std::size_t c = 0; c < classes; ++c) {
        z[c] = b[c];
        for (const auto& [f, v] : x) z[c] += w[c][f] * v;
      }
      auto p = softmax(z);
      p[design.labels[i]] -= 1.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const double r = p[c] / n;
        gb[c] += r;
        for (const auto& [f, v] : x) gw[c][f] += r * v;
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      b[c] -= config.learning_rate * gb[c];
      for (std::size_t f = 0; f < features; ++f) {
        w[c][f] -= config.learning_rate * gw[c][f];
      }
    }
    if (loss_history) loss_history->push_back(objective(w, b, design, config.l2));
  }

  return LinearTextModel(std::move(vocabulary), train_set.class_names(),
                         std::move(w), std::move(b), config);
}

double training_objective(const LinearTextModel& model, const Dataset& data,
                          double l2) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < model.vocabulary_size(); ++i) {
    index[model.token(i)] = i;
  }
  std::vector<std::vector<double>> w;
  std::vector<double> b;
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    auto row = model.weights(c);
    w.emplace_back(row.begin(), row.end());
    b.push_back(model.bias(c));
  }
  return objective(w, b, build_design(data, index), l2);
}

std::vector<ClassShare> predict_distribution(const LinearTextModel& model,
                                             const Dataset& dataset,
                                             const Selection& sel) {
  if (sel.empty()) return {};
  std::vector<std::size_t> counts(model.num_classes(), 0);
  for (auto id : sel.ids) {
    ++counts[model.predict(std::string_view(dataset.at(id).text())).index];
  }
  std::vector<ClassShare> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out.push_back({model.class_names()[c], counts[c],
                   static_cast<double>(counts[c]) /
                       static_cast<double>(sel.size())});
  }
  return out;
}

}  // namespace modeltalk
