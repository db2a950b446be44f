#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "modeltalk/errors.hpp"
#include "modeltalk/explain.hpp"

namespace modeltalk {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool ends_with_space(const std::string& s) { return s.empty() || is_space(s.back()); }

std::string escaped(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '*' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::vector<std::size_t> word_positions(const TokenizedText& tt) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (!tt.is_separator(i)) out.push_back(i);
  }
  return out;
}

// Logit contributions change additively under edits, so candidates are
// scored without rebuilding text. Final results are re-predicted from text.
struct EditScorer {
  const LinearTextModel& model;
  const TokenizedText& tt;
  std::vector<double> base;

  EditScorer(const LinearTextModel& m, const TokenizedText& t)
      : model(m), tt(t), base(m.logits(m.features(t))) {}

  void accumulate(std::vector<double>& logits, const Edit& e) const {
    if (auto f = model.feature_index(tt.tokens[e.position])) {
      for (std::size_t c = 0; c < logits.size(); ++c) logits[c] -= model.weight(c, *f);
    }
    if (e.kind == EditKind::substitute) {
      if (auto f = model.feature_index(e.word)) {
        for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += model.weight(c, *f);
      }
    }
  }

  std::vector<double> logits_after(const std::vector<Edit>& edits) const {
    auto l = base;
    for (const auto& e : edits) accumulate(l, e);
    return l;
  }
};

}  // namespace

EditedText apply_edits(const LinearTextModel& model, std::string_view text,
                       const TokenizedText& source, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(),
            [](const Edit& a, const Edit& b) { return a.position < b.position; });
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const auto& e = edits[i];
    if (e.position >= source.size()) throw ArgumentError("edit position out of range");
    if (source.is_separator(e.position)) throw ArgumentError("the field separator cannot be edited");
    if (i > 0 && edits[i - 1].position == e.position) {
      throw ArgumentError("edit positions must be distinct");
    }
  }

  EditedText out;
  out.original_tokens = source.tokens;
  std::string plain, marked;
  std::size_t cursor = 0;
  bool skip_space = false;
  for (const auto& e : edits) {
    const auto& span = source.spans[e.position];
    auto gap = text.substr(cursor, span.offset - cursor);
    if (skip_space) {
      while (!gap.empty() && is_space(gap.front())) gap.remove_prefix(1);
      skip_space = false;
    }
    plain += gap;
    marked += escaped(gap);
    if (e.kind == EditKind::substitute) {
      plain += e.word;
      marked += "**" + escaped(e.word) + "**";
    } else {
      skip_space = ends_with_space(plain);
    }
    cursor = span.offset + span.length;
  }
  auto rest = text.substr(cursor);
  if (skip_space) {
    while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
  }
  plain += rest;
  marked += escaped(rest);
  // Deleting the last word leaves a dangling space.
  if (text.empty() || !is_space(text.back())) {
    while (!plain.empty() && is_space(plain.back())) plain.pop_back();
    while (!marked.empty() && is_space(marked.back())) marked.pop_back();
  }

  out.edits = std::move(edits);
  out.text = std::move(plain);
  out.marked_text = std::move(marked);
  const auto x = model.features(tokenize(out.text));
  out.prediction = model.predict(x);
  out.probabilities = model.probabilities(x);
  return out;
}

CounterfactualResult nlpcfe(const LinearTextModel& model, const SynonymLexicon& lexicon,
                            std::string_view text, const CounterfactualOptions& options) {
  if (options.number == 0) throw ArgumentError("number must be at least 1");
  const auto tt = tokenize(text);
  CounterfactualResult result;
  result.original = model.predict(tt);
  const auto positions = word_positions(tt);
  if (positions.empty()) return result;

  std::map<std::size_t, std::vector<Edit>> options_at;
  for (auto p : positions) {
    auto& list = options_at[p];
    list.push_back({p, EditKind::remove, ""});
    std::set<std::string> seen{tt.tokens[p]};
    for (const auto* pool : {&lexicon.synonyms(tt.tokens[p]), &lexicon.antonyms(tt.tokens[p])}) {
      for (const auto& w : *pool) {
        if (seen.insert(w).second) list.push_back({p, EditKind::substitute, w});
      }
    }
  }

  // Deeper levels only touch the positions that support the prediction most.
  std::vector<std::size_t> deep = positions;
  {
    AttributionOptions ao;
    ao.topk = std::nullopt;
    const auto attr = nlpattribute(model, text, result.original.index, ao);
    std::stable_sort(deep.begin(), deep.end(), [&](std::size_t a, std::size_t b) {
      return attr.token_scores[a] > attr.token_scores[b];
    });
    if (deep.size() > options.deep_positions) deep.resize(options.deep_positions);
    std::sort(deep.begin(), deep.end());
  }

  const EditScorer scorer(model, tt);
  std::vector<std::vector<Edit>> flipped_sets;
  std::unordered_set<std::string> seen_texts;
  std::size_t evaluations = 0;

  auto is_superset_of_flip = [&](const std::vector<Edit>& edits) {
    for (const auto& f : flipped_sets) {
      if (f.size() >= edits.size()) continue;
      bool all = std::all_of(f.begin(), f.end(), [&](const Edit& e) {
        return std::find(edits.begin(), edits.end(), e) != edits.end();
      });
      if (all) return true;
    }
    return false;
  };

  for (std::size_t depth = 1; depth <= options.max_edits; ++depth) {
    if (result.results.size() >= options.number) break;
    const auto& pool = depth == 1 ? positions : deep;
    if (pool.size() < depth) break;

    struct Found {
      std::vector<Edit> edits;
      double probability;
    };
    std::vector<Found> found;

    // Enumerate position combinations, then every edit choice per position.
    std::vector<std::size_t> combo(depth);
    std::iota(combo.begin(), combo.end(), 0);
    bool budget_left = true;
    while (budget_left) {
      std::vector<std::size_t> choice(depth, 0);
      while (true) {
        std::vector<Edit> edits;
        for (std::size_t k = 0; k < depth; ++k) {
          edits.push_back(options_at[pool[combo[k]]][choice[k]]);
        }
        if (!is_superset_of_flip(edits)) {
          if (++evaluations > options.max_evaluations) {
            budget_left = false;
            break;
          }
          const auto logits = scorer.logits_after(edits);
          const auto label = argmax(logits);
          if (label != result.original.index) {
            found.push_back({edits, softmax(logits)[label]});
          }
        }
        bool advanced = false;
        for (std::size_t k = depth; k-- > 0;) {
          if (++choice[k] < options_at[pool[combo[k]]].size()) {
            advanced = true;
            break;
          }
          choice[k] = 0;
        }
        if (!advanced) break;
      }
      if (!budget_left) break;
      // Next combination of `depth` indices out of pool.size().
      std::size_t i = depth;
      while (i > 0 && combo[i - 1] == pool.size() - depth + i - 1) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < depth; ++j) combo[j] = combo[j - 1] + 1;
    }

    std::stable_sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
      return a.probability > b.probability;
    });
    for (auto& f : found) {
      flipped_sets.push_back(f.edits);
      if (result.results.size() >= options.number) continue;
      auto edited = apply_edits(model, text, tt, f.edits);
      if (edited.prediction.index == result.original.index) continue;
      if (!seen_texts.insert(edited.text).second) continue;
      result.results.push_back(std::move(edited));
    }
    if (evaluations > options.max_evaluations) break;
  }
  return result;
}

AdversarialResult adversarial(const LinearTextModel& model, const SynonymLexicon& lexicon,
                              const Instance& instance) {
  return adversarial(model, lexicon, instance.text(), instance.gold_label);
}

AdversarialResult adversarial(const LinearTextModel& model, const SynonymLexicon& lexicon,
                              std::string_view text, std::size_t gold_label) {
  if (gold_label >= model.num_classes()) throw ArgumentError("gold label out of range");
  const auto tt = tokenize(text);
  AdversarialResult result;
  result.gold_label = gold_label;
  result.original = model.predict(tt);
  if (result.original.index != gold_label) {
    result.status = AdversarialResult::Status::already_misclassified;
    return result;
  }

  const EditScorer scorer(model, tt);
  const double p_gold = softmax(scorer.base)[gold_label];
  auto p_after = [&](const std::vector<Edit>& edits) {
    return softmax(scorer.logits_after(edits))[gold_label];
  };

  struct Candidate {
    std::size_t position;
    double saliency;
    std::optional<Edit> best;
    double delta = 0.0;
  };
  std::vector<Candidate> candidates;
  for (auto p : word_positions(tt)) {
    Candidate c{p, p_gold - p_after({{p, EditKind::remove, ""}}), std::nullopt, 0.0};
    for (const auto& w : lexicon.synonyms(tt.tokens[p])) {
      Edit e{p, EditKind::substitute, w};
      const double d = p_gold - p_after({e});
      if (!c.best || d > c.delta) {
        c.best = e;
        c.delta = d;
      }
    }
    candidates.push_back(std::move(c));
  }
  if (candidates.empty()) return result;

  std::vector<double> saliency;
  for (const auto& c : candidates) saliency.push_back(c.saliency);
  const auto weights = softmax(saliency);
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].best && candidates[i].delta > 0.0) {
      order.emplace_back(weights[i] * candidates[i].delta, i);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<Edit> applied;
  for (const auto& [h, i] : order) {
    applied.push_back(*candidates[i].best);
    ++result.substitutions_tried;
    if (argmax(scorer.logits_after(applied)) == gold_label) continue;
    auto edited = apply_edits(model, text, tt, applied);
    if (edited.prediction.index != gold_label) {
      result.status = AdversarialResult::Status::success;
      result.example = std::move(edited);
      return result;
    }
  }
  result.status = AdversarialResult::Status::failed;
  return result;
}

std::vector<std::size_t> augment_eligible(const TokenizedText& text,
                                          const SynonymLexicon& lexicon) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.is_separator(i) || is_stopword(text.tokens[i])) continue;
    if (lexicon.synonyms(text.tokens[i]).empty()) continue;
    out.push_back(i);
  }
  return out;
}

std::size_t augment_count(std::size_t eligible, double ratio) {
  if (eligible == 0) return 0;
  // 0.3 * 10 is 3.0000000000000004 in binary floating point.
  const auto n = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(eligible) - 1e-9));
  return std::clamp<std::size_t>(n, 1, eligible);
}

AugmentResult augment(const LinearTextModel& model, const SynonymLexicon& lexicon,
                      std::string_view text, std::uint64_t seed, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("ratio must be in (0, 1]");
  const auto tt = tokenize(text);
  AugmentResult result;
  result.original = model.predict(tt);
  const auto eligible = augment_eligible(tt, lexicon);
  result.eligible = eligible.size();
  if (eligible.empty()) return result;

  std::mt19937_64 rng(seed);
  std::vector<Edit> edits;
  for (auto k : sample_without_replacement(rng, eligible.size(),
                                           augment_count(eligible.size(), ratio))) {
    const auto p = eligible[k];
    edits.push_back({p, EditKind::substitute, lexicon.synonyms(tt.tokens[p]).front()});
  }
  result.edited = apply_edits(model, text, tt, std::move(edits));
  return result;
}

}  // namespace modeltalk
