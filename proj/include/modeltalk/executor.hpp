#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modeltalk/cache.hpp"
#include "modeltalk/data.hpp"
#include "modeltalk/explain.hpp"
#include "modeltalk/grammar.hpp"
#include "modeltalk/model.hpp"
#include "modeltalk/respond.hpp"

namespace modeltalk {

struct ExecutorConfig {
  // Seeds augment and the built-in rationale template choice.
  std::uint64_t seed = 7;
  std::size_t ig_steps = 32;
  CounterfactualOptions counterfactual;
  // Size of the dataset-wide ranking the attribution verbalizer compares to.
  std::size_t global_rank_depth = 10;
};

// Runs parse trees against one dataset and its model.
class Executor {
 public:
  Executor(const Dataset& dataset, const LinearTextModel& model, const SynonymLexicon& lexicon,
           const SimilarityIndex& similarity, RationaleBackend* rationale_backend = nullptr,
           ExplanationCache* cache = nullptr, ExecutorConfig config = {});

  // Throws ArgumentError for a custominput parse without stored custom text.
  OperationResult execute(const ParseTree& tree,
                          const std::optional<std::string>& custom_input = std::nullopt) const;

  // The filter chain of a tree: `and` narrows, `or` unites. No filters means
  // the whole dataset.
  Selection selection(const ParseTree& tree) const;

  // Key under which an instance-level action on a dataset instance is cached;
  // nullopt for uncacheable actions.
  std::optional<CacheKey> cache_key(const Clause& action, InstanceId id) const;

  // Ops warm_cache may precompute.
  static const std::vector<OpName>& warmable_ops();

  // Computes every (instance, op) entry with default arguments; returns the
  // number of new entries written. Throws ArgumentError for other ops.
  std::size_t warm_cache(ExplanationCache& cache, const std::vector<OpName>& ops) const;

  const Dataset& dataset() const { return *dataset_; }
  const LinearTextModel& model() const { return *model_; }
  const ExecutorConfig& config() const { return config_; }

 private:
  struct Subject {
    std::optional<InstanceId> id;
    std::string text;
  };

  OperationResult run_instance(const Clause& action, const Subject& subject) const;
  OperationResult run_instance_cached(const Clause& action, const Subject& subject) const;
  OperationResult run_selection(const Clause& action, const Selection& sel) const;

  const Dataset* dataset_;
  const LinearTextModel* model_;
  const SynonymLexicon* lexicon_;
  const SimilarityIndex* similarity_;
  RationaleBackend* rationale_backend_;
  ExplanationCache* cache_;
  ExecutorConfig config_;
  // globaltopk per class, for the attribution verbalizer.
  std::vector<std::vector<GlobalAttribution>> global_;
};

// Canonical text of a single clause, e.g. "nlpattribute topk 3".
std::string clause_text(const Clause& clause);

}  // namespace modeltalk
