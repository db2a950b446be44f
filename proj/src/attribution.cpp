#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <numeric>

#include "modeltalk/errors.hpp"
#include "modeltalk/explain.hpp"

namespace modeltalk {

double Attribution::total() const {
  return std::accumulate(token_scores.begin(), token_scores.end(), 0.0);
}

namespace {

std::vector<std::size_t> ranked_indices(const std::vector<double>& scores,
                                        std::optional<std::size_t> k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (k && idx.size() > *k) idx.resize(*k);
  return idx;
}

}  // namespace

Attribution nlpattribute(const LinearTextModel& model, std::string_view text,
                         std::size_t target_class, const AttributionOptions& options) {
  if (target_class >= model.num_classes()) throw ArgumentError("target class out of range");
  const auto tt = tokenize(text);
  const bool any_word = std::any_of(tt.tokens.begin(), tt.tokens.end(),
                                    [](const std::string& t) { return t != kFieldSeparator; });
  if (!any_word) throw ArgumentError("nothing to attribute");
  if (options.ig_steps == 0) throw ArgumentError("ig_steps must be positive");

  const auto x = model.features(tt);
  const auto per_feature = integrated_gradients(
      x, SparseVector{}, options.ig_steps,
      [&](const SparseVector& point) { return model.logit_gradient(point, target_class); });

  Attribution out;
  out.target_class = target_class;
  out.level = options.level;
  out.tokens = tt.tokens;
  out.token_sentence = tt.sentence;
  out.token_scores.assign(tt.size(), 0.0);

  // Split each feature's attribution equally across its occurrences.
  std::map<std::size_t, double> feature_score(per_feature.begin(), per_feature.end());
  std::map<std::size_t, double> feature_count(x.begin(), x.end());
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (tt.is_separator(i)) continue;
    auto f = model.feature_index(tt.tokens[i]);
    if (!f) continue;
    out.token_scores[i] = feature_score[*f] / feature_count[*f];
  }

  out.sentence_scores.assign(tt.sentence_count(), 0.0);
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (!tt.is_separator(i)) out.sentence_scores[tt.sentence[i]] += out.token_scores[i];
  }

  if (options.level == AttributionLevel::sentence) {
    out.top = ranked_indices(out.sentence_scores, options.topk);
  } else {
    std::vector<double> masked = out.token_scores;
    std::vector<std::size_t> words;
    for (std::size_t i = 0; i < tt.size(); ++i) {
      if (!tt.is_separator(i)) words.push_back(i);
    }
    std::vector<double> word_scores;
    for (auto i : words) word_scores.push_back(out.token_scores[i]);
    for (auto r : ranked_indices(word_scores, options.topk)) out.top.push_back(words[r]);
  }
  return out;
}

std::vector<GlobalAttribution> globaltopk(const LinearTextModel& model,
                                          const Dataset& dataset, std::size_t k,
                                          std::size_t target_class,
                                          std::size_t min_occurrence) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  std::map<std::string, std::pair<double, std::size_t>> totals;
  AttributionOptions opts;
  opts.topk = std::nullopt;
  for (const auto& inst : dataset.instances()) {
    const auto text = inst.text();
    const auto tt = tokenize(text);
    if (std::none_of(tt.tokens.begin(), tt.tokens.end(),
                     [](const std::string& t) { return t != kFieldSeparator; })) {
      continue;
    }
    const auto attr = nlpattribute(model, text, target_class, opts);
    for (std::size_t i = 0; i < attr.tokens.size(); ++i) {
      if (attr.tokens[i] == kFieldSeparator) continue;
      auto& [sum, count] = totals[attr.tokens[i]];
      sum += attr.token_scores[i];
      ++count;
    }
  }
  std::vector<GlobalAttribution> out;
  for (const auto& [token, acc] : totals) {
    if (acc.second < min_occurrence) continue;
    out.push_back({token, acc.first / static_cast<double>(acc.second), acc.second});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GlobalAttribution& a, const GlobalAttribution& b) {
                     return a.mean > b.mean;  // map order already breaks ties by token
                   });
  if (out.size() > k) out.resize(k);
  return out;
}

namespace {

std::string ordinal(std::size_t n) {
  static const std::array<const char*, 10> words = {
      "first", "second", "third", "fourth", "fifth",
      "sixth", "seventh", "eighth", "ninth", "tenth"};
  if (n < words.size()) return words[n];
  return fmt::format("{}th", n + 1);
}

}  // namespace

std::vector<std::string> verbalize_attribution(const Attribution& attribution,
                                               const std::vector<GlobalAttribution>& global) {
  std::vector<std::string> out;
  if (attribution.tokens.empty()) return out;

  // Most salient word token regardless of the requested level.
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < attribution.tokens.size(); ++i) {
    if (attribution.tokens[i] == kFieldSeparator) continue;
    if (!best || attribution.token_scores[i] > attribution.token_scores[*best]) best = i;
  }
  if (!best) return out;

  const std::size_t sentences = attribution.sentence_scores.size();
  if (sentences > 1) {
    const std::size_t s = attribution.token_sentence[*best];
    std::string which = s == 0               ? "first"
                        : s + 1 == sentences ? "last"
                                             : ordinal(s);
    out.push_back(fmt::format("The {} sentence contains the most salient token.", which));
  }

  const auto& token = attribution.tokens[*best];
  auto it = std::find_if(global.begin(), global.end(),
                         [&](const GlobalAttribution& g) { return g.token == token; });
  if (it == global.end()) {
    out.push_back(fmt::format(
        "**{}** is more salient for this instance than it is across the dataset.", token));
  } else {
    const auto global_rank = static_cast<std::size_t>(it - global.begin()) + 1;
    if (global_rank > 1) {
      out.push_back(fmt::format(
          "**{}** is more salient for this instance than it is across the dataset "
          "(rank {} globally).",
          token, global_rank));
    } else {
      out.push_back(fmt::format(
          "**{}** is also the most salient token across the dataset.", token));
    }
  }
  return out;
}

}  // namespace modeltalk
