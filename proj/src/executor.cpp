#include "modeltalk/executor.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "modeltalk/errors.hpp"

namespace modeltalk {

namespace {

using json = nlohmann::json;

std::int64_t int_arg(const Clause& c, std::size_t i, std::int64_t fallback) {
  if (i < c.args.size()) {
    if (const auto* v = std::get_if<std::int64_t>(&c.args[i])) return *v;
  }
  return fallback;
}

std::string keyword_arg(const Clause& c, std::size_t i) {
  if (i < c.args.size()) {
    if (const auto* k = std::get_if<Keyword>(&c.args[i])) return k->value;
  }
  return "";
}

bool has_keyword(const Clause& c, std::string_view kw) {
  return std::any_of(c.args.begin(), c.args.end(), [&](const Arg& a) {
    const auto* k = std::get_if<Keyword>(&a);
    return k && k->value == kw;
  });
}

std::optional<std::string> quoted_arg(const Clause& c) {
  for (const auto& a : c.args) {
    if (const auto* q = std::get_if<QuotedString>(&a)) return q->value;
  }
  return std::nullopt;
}

json instance_json(const Dataset& ds, const Instance& inst) {
  json fields = json::object();
  for (const auto& [name, text] : inst.fields) fields[name] = text;
  return {{"id", inst.id},
          {"text", inst.text()},
          {"fields", fields},
          {"gold", ds.class_names()[inst.gold_label]}};
}

json shares_json(const std::vector<ClassShare>& shares) {
  json out = json::array();
  for (const auto& s : shares) {
    out.push_back({{"label", s.label}, {"count", s.count}, {"fraction", s.fraction}});
  }
  return out;
}

json edited_json(const LinearTextModel& model, const EditedText& e) {
  json edits = json::array();
  for (const auto& ed : e.edits) {
    json j = {{"position", ed.position},
              {"original", e.original_tokens[ed.position]},
              {"kind", ed.kind == EditKind::substitute ? "substitute" : "remove"}};
    if (ed.kind == EditKind::substitute) j["word"] = ed.word;
    edits.push_back(j);
  }
  return {{"text", e.text},
          {"marked", e.marked_text},
          {"label", model.class_names()[e.prediction.index]},
          {"probability", e.probabilities[e.prediction.index]},
          {"edits", edits}};
}

std::string sentence_text(const Attribution& attr, std::size_t s) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < attr.tokens.size(); ++i) {
    if (attr.token_sentence[i] == s && attr.tokens[i] != kFieldSeparator) {
      words.push_back(attr.tokens[i]);
    }
  }
  return join(words, " ");
}

bool is_cacheable(OpName op) {
  switch (op) {
    case OpName::nlpattribute:
    case OpName::rationalize:
    case OpName::similar:
    case OpName::nlpcfe:
    case OpName::adversarial:
    case OpName::augment:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string clause_text(const Clause& clause) {
  std::string out(to_string(clause.op));
  for (const auto& a : clause.args) out += " " + render_arg(a);
  return out;
}

Executor::Executor(const Dataset& dataset, const LinearTextModel& model,
                   const SynonymLexicon& lexicon, const SimilarityIndex& similarity,
                   RationaleBackend* rationale_backend, ExplanationCache* cache,
                   ExecutorConfig config)
    : dataset_(&dataset),
      model_(&model),
      lexicon_(&lexicon),
      similarity_(&similarity),
      rationale_backend_(rationale_backend),
      cache_(cache),
      config_(config) {
  if (model.class_names() != dataset.class_names()) {
    throw ConfigError("model classes do not match dataset '" + dataset.name() + "'");
  }
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    global_.push_back(globaltopk(model, dataset, config_.global_rank_depth, c));
  }
}

Selection Executor::selection(const ParseTree& tree) const {
  const auto all = select_all(*dataset_);
  auto apply = [&](const Clause& c, const Selection& base) -> std::optional<Selection> {
    switch (c.op) {
      case OpName::filter:
        return filter_id(base, int_arg(c, 1, -1));
      case OpName::includes:
        return filter_includes(*dataset_, base, quoted_arg(c).value_or(""));
      default:
        return std::nullopt;
    }
  };
  std::optional<Selection> cur;
  for (std::size_t i = 0; i < tree.clauses.size(); ++i) {
    const auto& c = tree.clauses[i];
    if (c.op != OpName::filter && c.op != OpName::includes) continue;
    if (!cur) {
      cur = apply(c, all);
    } else if (tree.connectives[i - 1] == Connective::or_) {
      cur = unite(*cur, *apply(c, all));
    } else {
      cur = apply(c, *cur);
    }
  }
  return cur ? *cur : all;
}

OperationResult Executor::execute(const ParseTree& tree,
                                  const std::optional<std::string>& custom_input) const {
  const Clause* action = tree.action();
  const auto sel = selection(tree);
  if (!action) {
    return run_selection(Clause{OpName::show, {}}, sel);
  }
  const auto& sig = signature(action->op);

  if (tree.has_custom_input()) {
    if (!custom_input || trim(*custom_input).empty()) {
      throw ArgumentError("no custom input has been provided yet");
    }
    if (!sig.supports_custom_input) {
      json supported = json::array();
      for (const auto& s : registry()) {
        if (s.supports_custom_input && !s.is_filter()) supported.push_back(s.name);
      }
      return make_result(ResultType::unsupported_custom_input,
                         {{"intent", sig.name}, {"supported", supported}});
    }
    return run_instance(*action, Subject{std::nullopt, *custom_input});
  }

  const bool instance_scoped =
      sig.requires_instance || (action->op == OpName::predict && tree.has_filter_id());
  if (instance_scoped) {
    if (sel.empty()) return make_result(ResultType::empty_selection, {{"op", sig.name}});
    if (sel.size() > 1) {
      return make_result(ResultType::error,
                         {{"message", fmt::format("{} needs a single instance", sig.name)}});
    }
    const auto& inst = dataset_->at(sel.ids.front());
    return run_instance_cached(*action, Subject{inst.id, inst.text()});
  }
  return run_selection(*action, sel);
}

std::optional<CacheKey> Executor::cache_key(const Clause& action, InstanceId id) const {
  if (!is_cacheable(action.op)) return std::nullopt;
  const auto& cfe = config_.counterfactual;
  auto params = fmt::format("{}|seed={}|ig={}|cfe={},{},{}|backend={}", clause_text(action),
                            config_.seed, config_.ig_steps, cfe.max_edits, cfe.deep_positions,
                            cfe.max_evaluations, rationale_backend_ ? "external" : "builtin");
  return CacheKey{model_->content_hash(), dataset_->name(), std::string(to_string(action.op)),
                  id, std::move(params)};
}

OperationResult Executor::run_instance_cached(const Clause& action, const Subject& subject) const {
  std::optional<CacheKey> key;
  if (cache_ && subject.id) key = cache_key(action, *subject.id);
  if (key) {
    if (auto hit = cache_->get(*key)) {
      if (auto type = parse_result_type(hit->value("type", ""))) return {*type, std::move(*hit)};
    }
  }
  auto result = run_instance(action, subject);
  if (key && !result.payload.value("fallback", false)) cache_->put(*key, result.payload);
  return result;
}

OperationResult Executor::run_instance(const Clause& action, const Subject& subject) const {
  const auto& model = *model_;
  const auto tt = tokenize(subject.text);
  const auto prediction = model.predict(tt);
  const auto& label = model.class_names()[prediction.index];
  json subj = subject.id ? json{{"id", *subject.id}} : json{{"custom", true}, {"text", subject.text}};

  switch (action.op) {
    case OpName::predict: {
      json probs = json::object();
      const auto p = model.probabilities(model.features(tt));
      for (std::size_t c = 0; c < p.size(); ++c) probs[model.class_names()[c]] = p[c];
      return make_result(ResultType::predict, {{"subject", subj},
                                               {"label", label},
                                               {"index", prediction.index},
                                               {"probabilities", probs}});
    }
    case OpName::likelihood: {
      json probs = json::array();
      const auto p = model.probabilities(model.features(tt));
      for (std::size_t c = 0; c < p.size(); ++c) {
        probs.push_back({{"label", model.class_names()[c]}, {"probability", p[c]}});
      }
      return make_result(ResultType::likelihood,
                         {{"subject", subj}, {"label", label}, {"probabilities", probs}});
    }
    case OpName::nlpattribute: {
      AttributionOptions opts;
      opts.ig_steps = config_.ig_steps;
      opts.level = has_keyword(action, "sentence") ? AttributionLevel::sentence
                                                   : AttributionLevel::token;
      if (keyword_arg(action, 0) == "all") {
        opts.topk = std::nullopt;
      } else {
        opts.topk = static_cast<std::size_t>(int_arg(action, 1, 3));
      }
      auto attr = nlpattribute(model, subject.text, prediction.index, opts);
      attr.instance = subject.id;
      json tokens = json::array();
      for (std::size_t i = 0; i < attr.tokens.size(); ++i) {
        tokens.push_back({{"token", attr.tokens[i]},
                          {"score", attr.token_scores[i]},
                          {"sentence", attr.token_sentence[i]}});
      }
      json payload = {{"subject", subj},
                      {"label", label},
                      {"target", prediction.index},
                      {"level", opts.level == AttributionLevel::sentence ? "sentence" : "token"},
                      {"tokens", tokens},
                      {"top", attr.top},
                      {"total", attr.total()},
                      {"verbalization", verbalize_attribution(attr, global_[prediction.index])}};
      if (opts.level == AttributionLevel::sentence) {
        json sentences = json::array();
        for (std::size_t s = 0; s < attr.sentence_scores.size(); ++s) {
          sentences.push_back(
              {{"index", s}, {"text", sentence_text(attr, s)}, {"score", attr.sentence_scores[s]}});
        }
        payload["sentences"] = sentences;
        return make_result(ResultType::nlpattribute_sentence, std::move(payload));
      }
      return make_result(ResultType::nlpattribute, std::move(payload));
    }
    case OpName::nlpcfe: {
      auto opts = config_.counterfactual;
      opts.number = static_cast<std::size_t>(int_arg(action, 0, 1));
      const auto r = nlpcfe(model, *lexicon_, subject.text, opts);
      if (r.results.empty()) {
        return make_result(ResultType::nlpcfe_none, {{"subject", subj}, {"original", label}});
      }
      json results = json::array();
      for (const auto& e : r.results) results.push_back(edited_json(model, e));
      return make_result(ResultType::nlpcfe,
                         {{"subject", subj}, {"original", label}, {"results", results}});
    }
    case OpName::adversarial: {
      if (!subject.id) break;
      const auto& inst = dataset_->at(*subject.id);
      const auto r = adversarial(model, *lexicon_, inst);
      const auto& gold = model.class_names()[inst.gold_label];
      json payload = {{"subject", subj},
                      {"gold", gold},
                      {"label", label},
                      {"substitutions_tried", r.substitutions_tried}};
      switch (r.status) {
        case AdversarialResult::Status::already_misclassified:
          return make_result(ResultType::adversarial_misclassified, std::move(payload));
        case AdversarialResult::Status::failed:
          return make_result(ResultType::adversarial_failed, std::move(payload));
        case AdversarialResult::Status::success:
          payload["example"] = edited_json(model, *r.example);
          return make_result(ResultType::adversarial, std::move(payload));
      }
      break;
    }
    case OpName::augment: {
      const auto seed = config_.seed + static_cast<std::uint64_t>(subject.id.value_or(0));
      const auto r = augment(model, *lexicon_, subject.text, seed);
      if (!r.edited) return make_result(ResultType::augment_none, {{"subject", subj}});
      return make_result(ResultType::augment, {{"subject", subj},
                                               {"original", label},
                                               {"eligible", r.eligible},
                                               {"example", edited_json(model, *r.edited)}});
    }
    case OpName::rationalize: {
      AttributionOptions opts;
      opts.ig_steps = config_.ig_steps;
      opts.topk = std::nullopt;
      const auto attr = nlpattribute(model, subject.text, prediction.index, opts);
      const auto r = rationalize(subject.text, Prediction{label, prediction.index}, attr,
                                 rationale_backend_, config_.seed);
      return make_result(ResultType::rationalize, {{"subject", subj},
                                                   {"label", label},
                                                   {"rationale", r.text},
                                                   {"cited", r.cited_tokens},
                                                   {"external", r.external},
                                                   {"fallback", r.fallback}});
    }
    case OpName::similar: {
      const auto n = static_cast<std::size_t>(int_arg(action, 0, 1));
      const auto hits = similarity_->query(subject.text, n, subject.id);
      if (hits.empty()) return make_result(ResultType::similar_none, {{"subject", subj}});
      json instances = json::array();
      for (const auto& h : hits) {
        auto j = instance_json(*dataset_, dataset_->at(h.id));
        j["cosine"] = h.cosine;
        instances.push_back(j);
      }
      return make_result(ResultType::similar, {{"subject", subj}, {"instances", instances}});
    }
    default:
      break;
  }
  throw std::logic_error(fmt::format("'{}' cannot run on a single input", to_string(action.op)));
}

OperationResult Executor::run_selection(const Clause& action, const Selection& sel) const {
  const auto& ds = *dataset_;
  const auto& model = *model_;
  const auto op_name = std::string(to_string(action.op));
  auto empty = [&] { return make_result(ResultType::empty_selection, {{"op", op_name}}); };

  switch (action.op) {
    case OpName::show: {
      if (sel.empty()) return empty();
      const auto page = modeltalk::show(ds, sel, 0);
      json instances = json::array();
      for (const auto* inst : page.instances) instances.push_back(instance_json(ds, *inst));
      return make_result(ResultType::show,
                         {{"page", page.page}, {"total", page.total}, {"instances", instances}});
    }
    case OpName::countdata:
      return make_result(ResultType::countdata, {{"count", countdata(sel)}});
    case OpName::label: {
      if (sel.empty()) return empty();
      return make_result(ResultType::label, {{"total", sel.size()},
                                             {"distribution", shares_json(label_distribution(ds, sel))}});
    }
    case OpName::predict: {
      if (sel.empty()) return empty();
      return make_result(ResultType::predict_distribution,
                         {{"total", sel.size()},
                          {"distribution", shares_json(predict_distribution(model, ds, sel))}});
    }
    case OpName::mistakes: {
      if (sel.empty()) return empty();
      const bool sample = keyword_arg(action, 0) == "sample";
      const auto n = static_cast<std::size_t>(int_arg(action, 1, 3));
      const auto r = mistakes(ds, sel, model, sample ? MistakeMode::sample : MistakeMode::count, n);
      if (r.count == 0) return make_result(ResultType::no_mistakes, {{"total", r.total}});
      if (!sample) {
        return make_result(ResultType::mistakes_count, {{"count", r.count}, {"total", r.total}});
      }
      json instances = json::array();
      for (auto id : r.sample) {
        auto j = instance_json(ds, ds.at(id));
        j["predicted"] = model.predict(ds.at(id).text()).label;
        instances.push_back(j);
      }
      return make_result(ResultType::mistakes_sample,
                         {{"count", r.count}, {"total", r.total}, {"instances", instances}});
    }
    case OpName::score: {
      if (sel.empty()) return empty();
      const auto metric = parse_metric(keyword_arg(action, 0));
      const auto value = score(ds, sel, model, metric);
      return make_result(ResultType::score, {{"metric", std::string(to_string(metric))},
                                             {"value", value.value_or(0.0)},
                                             {"total", sel.size()}});
    }
    case OpName::data: {
      json payload = {{"text", describe_metadata(ds, &model, MetadataKind::data)},
                      {"split", std::string(to_string(ds.split_tag()))}};
      if (auto k = keyword_arg(action, 0); !k.empty()) payload["requested_split"] = k;
      return make_result(ResultType::data, std::move(payload));
    }
    case OpName::model:
      return make_result(ResultType::model,
                         {{"text", describe_metadata(ds, &model, MetadataKind::model)}});
    case OpName::function:
      return make_result(ResultType::function);
    case OpName::self:
      return make_result(ResultType::self);
    case OpName::globaltopk: {
      const auto n = static_cast<std::size_t>(int_arg(action, 0, 3));
      std::vector<std::size_t> classes;
      if (auto cls = quoted_arg(action)) {
        auto idx = ds.class_index(*cls);
        if (!idx) {
          auto alias = ds.label_aliases().find(to_lower(*cls));
          if (alias != ds.label_aliases().end()) idx = ds.class_index(alias->second);
        }
        if (!idx) {
          return make_result(ResultType::error,
                             {{"message", fmt::format("there is no class named '{}'", *cls)}});
        }
        classes.push_back(*idx);
      } else {
        for (std::size_t c = 0; c < model.num_classes(); ++c) classes.push_back(c);
      }
      json out = json::array();
      bool any = false;
      for (auto c : classes) {
        json tokens = json::array();
        for (const auto& g : globaltopk(model, ds, n, c)) {
          tokens.push_back({{"token", g.token}, {"mean", g.mean}, {"occurrences", g.occurrences}});
        }
        any = any || !tokens.empty();
        out.push_back({{"label", model.class_names()[c]}, {"tokens", tokens}});
      }
      if (!any) return make_result(ResultType::globaltopk_none, {{"number", n}});
      return make_result(ResultType::globaltopk, {{"number", n}, {"classes", out}});
    }
    case OpName::keywords: {
      if (sel.empty()) return empty();
      const auto n = static_cast<std::size_t>(int_arg(action, 0, 5));
      json out = json::array();
      for (const auto& k : keywords(ds, sel, n)) {
        out.push_back({{"token", k.token}, {"count", k.count}});
      }
      return make_result(ResultType::keywords, {{"number", n}, {"keywords", out}});
    }
    default:
      break;
  }
  throw std::logic_error(fmt::format("'{}' needs a single instance", op_name));
}

const std::vector<OpName>& Executor::warmable_ops() {
  static const std::vector<OpName> ops = {OpName::nlpattribute, OpName::rationalize,
                                          OpName::similar};
  return ops;
}

std::size_t Executor::warm_cache(ExplanationCache& cache, const std::vector<OpName>& ops) const {
  for (auto op : ops) {
    const auto& w = warmable_ops();
    if (std::find(w.begin(), w.end(), op) == w.end()) {
      throw ArgumentError(fmt::format("'{}' cannot be precomputed", to_string(op)));
    }
  }
  std::size_t written = 0;
  for (auto op : ops) {
    // Same default arguments the parser fills in.
    const auto tree = parse_string(fmt::format("filter id 0 and {}", to_string(op)));
    const auto& action = tree.clauses.back();
    for (const auto& inst : dataset_->instances()) {
      const auto key = *cache_key(action, inst.id);
      if (cache.contains(key)) continue;
      const auto result = run_instance(action, Subject{inst.id, inst.text()});
      if (result.payload.value("fallback", false)) continue;
      if (cache.put(key, result.payload)) ++written;
    }
  }
  return written;
}

}  // namespace modeltalk
