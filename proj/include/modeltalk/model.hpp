#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modeltalk/data.hpp"
#include "modeltalk/sparse.hpp"
#include "modeltalk/text.hpp"

namespace modeltalk {

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 200;
  double l2 = 1e-3;
  std::uint64_t seed = 13;
};

struct Prediction {
  std::string label;
  std::size_t index = 0;
};

// Bag-of-words multinomial logistic regression over token counts.
class LinearTextModel {
 public:
  LinearTextModel(std::vector<std::string> vocabulary,
                  std::vector<std::string> class_names,
                  std::vector<std::vector<double>> weights,
                  std::vector<double> biases, TrainConfig config = {});

  std::size_t num_classes() const { return class_names_.size(); }
  std::size_t vocabulary_size() const { return vocabulary_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::string& token(std::size_t feature) const {
    return vocabulary_[feature];
  }
  std::optional<std::size_t> feature_index(std::string_view token) const;
  std::span<const double> weights(std::size_t cls) const { return weights_[cls]; }
  double weight(std::size_t cls, std::size_t feature) const {
    return weights_[cls][feature];
  }
  double bias(std::size_t cls) const { return biases_[cls]; }
  const TrainConfig& train_config() const { return config_; }

  // Out-of-vocabulary tokens and field separators are dropped.
  SparseVector features(const TokenizedText& text) const;

  std::vector<double> logits(const SparseVector& x) const;
  double logit(const SparseVector& x, std::size_t cls) const;
  std::vector<double> probabilities(const SparseVector& x) const;

  // Argmax of the logits, ties to the lowest class index.
  Prediction predict(const SparseVector& x) const;
  Prediction predict(const TokenizedText& text) const;
  Prediction predict(std::string_view text) const;
  std::vector<double> likelihood(std::string_view text) const;

  // d logit_cls / d x, restricted to the features present in x.
  SparseVector logit_gradient(const SparseVector& x, std::size_t cls) const;

  std::string to_json() const;
  static LinearTextModel from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static LinearTextModel load(const std::filesystem::path& path);

  // SHA-256 over the serialized model; keys the explanation cache.
  const std::string& content_hash() const { return hash_; }

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<double>> weights_;
  std::vector<double> biases_;
  TrainConfig config_;
  std::string hash_;
};

std::size_t argmax(std::span<const double> values);
std::vector<double> softmax(std::span<const double> logits);

// Full-batch gradient descent on L2-regularized multinomial cross-entropy.
// Weights start at zero. loss_history, when given, receives the objective
// before every epoch and after the last one.
LinearTextModel train(const Dataset& train_set, const TrainConfig& config,
                      std::vector<double>* loss_history = nullptr);

// Mean cross-entropy plus l2/2 * ||W||^2.
double training_objective(const LinearTextModel& model, const Dataset& data,
                          double l2);

std::vector<ClassShare> predict_distribution(const LinearTextModel& model,
                                             const Dataset& dataset,
                                             const Selection& sel);

std::string sha256_hex(std::string_view bytes);

}  // namespace modeltalk
