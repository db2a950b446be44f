#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "modeltalk/errors.hpp"
#include "modeltalk/executor.hpp"
#include "modeltalk/grammar.hpp"
#include "modeltalk/respond.hpp"
#include "support.hpp"

namespace mt = modeltalk;
using json = nlohmann::json;

namespace {

mt::TemplateRegistry bundled() { return mt::TemplateRegistry::load(testsupport::data_dir() / "templates"); }

struct Bench {
  mt::Dataset dataset;
  mt::LinearTextModel model;
  mt::SynonymLexicon lexicon;
  mt::SimilarityIndex similarity;
  mt::Executor executor;

  Bench(mt::Dataset ds, mt::LinearTextModel m, mt::SynonymLexicon lex)
      : dataset(std::move(ds)),
        model(std::move(m)),
        lexicon(std::move(lex)),
        similarity(dataset),
        executor(dataset, model, lexicon, similarity) {}

  mt::OperationResult run(const std::string& parse,
                          const std::optional<std::string>& custom = std::nullopt) const {
    return executor.execute(mt::parse_string(parse), custom);
  }
};

std::unique_ptr<Bench> olid_bench() {
  auto ds = testsupport::olid();
  auto model = mt::train(ds, {});
  auto lex = mt::SynonymLexicon::load(testsupport::data_dir() / "lexicon" / "synonyms.tsv",
                                      testsupport::data_dir() / "lexicon" / "antonyms.tsv");
  return std::make_unique<Bench>(std::move(ds), std::move(model), std::move(lex));
}

// Heavy bias to class 0, nothing substitutable, no token seen twice.
std::unique_ptr<Bench> barren_bench() {
  auto ds = testsupport::make_dataset({{"the and", 1}, {"of it", 0}});
  auto model = testsupport::make_binary_model({{"the", 0.1}}, 50.0, 0.0);
  return std::make_unique<Bench>(std::move(ds), std::move(model), mt::SynonymLexicon{});
}

// A sample payload for every result type.
std::vector<mt::OperationResult> sample_results() {
  std::vector<mt::OperationResult> out;
  auto olid = olid_bench();
  for (const auto* p :
       {"filter id 3 and show", "includes \"zzzqqq\" and show", "countdata", "label",
        "filter id 3 and predict", "predict", "filter id 3 and likelihood", "mistakes count",
        "mistakes sample 3", "filter id 0 and mistakes count", "score accuracy", "score f1",
        "data", "model", "function", "self", "filter id 3 and nlpattribute topk 3",
        "filter id 3 and nlpattribute all sentence", "globaltopk 3",
        "globaltopk 5 class \"offensive\"", "filter id 7 and nlpcfe 2",
        "filter id 19 and adversarial", "filter id 3 and adversarial",
        "filter id 63 and adversarial", "filter id 3 and augment",
        "filter id 3 and rationalize", "keywords 5", "filter id 3 and similar 2",
        "filter id 62 and similar 1"}) {
    out.push_back(olid->run(p));
  }
  out.push_back(olid->run("custominput and predict", "you are a *star*"));
  out.push_back(olid->run("custominput and nlpattribute topk 3", "you are a liar"));

  auto barren = barren_bench();
  for (const auto* p : {"filter id 0 and nlpcfe 1", "filter id 1 and adversarial",
                        "filter id 0 and adversarial", "filter id 0 and augment",
                        "globaltopk 3", "filter id 0 and similar 1"}) {
    out.push_back(barren->run(p));
  }
  auto lonely = std::make_unique<Bench>(testsupport::make_dataset({{"alone", 0}}),
                                        testsupport::make_binary_model({{"alone", 1.0}}),
                                        mt::SynonymLexicon{});
  out.push_back(lonely->run("filter id 0 and similar 3"));

  using R = mt::ResultType;
  out.push_back(mt::make_result(R::greeting));
  out.push_back(mt::make_result(R::acknowledgment));
  out.push_back(mt::make_result(R::farewell));
  out.push_back(mt::make_result(
      R::clarify_intent,
      {{"candidates",
        {{{"intent", "augment"}, {"score", 0.5}, {"description", "generate a variant"}},
         {{"intent", "similar"}, {"score", 0.49}, {"description", "find similar instances"}}}}}));
  out.push_back(mt::make_result(R::clarify_id, {{"intent", "nlpcfe"}, {"task", "a counterfactual"}}));
  out.push_back(mt::make_result(R::clarify_slot, {{"intent", "score"}, {"slot", "metric"}}));
  out.push_back(mt::make_result(R::clarify_invalid,
                                {{"intent", "show"}, {"slot", "id"}, {"reason", "there is no instance 999"}}));
  out.push_back(mt::make_result(R::clarify_abandon));
  out.push_back(mt::make_result(R::unsupported_custom_input,
                                {{"intent", "nlpcfe"}, {"supported", {"predict", "nlpattribute", "similar"}}}));
  out.push_back(mt::make_result(R::unrecognized));
  out.push_back(mt::make_result(R::error, {{"message", "boom *"}}));
  return out;
}

const std::vector<mt::OperationResult>& samples() {
  static const auto s = sample_results();
  return s;
}

}  // namespace

TEST(FormatPercent, TwoDecimals) {
  EXPECT_EQ(mt::format_percent(0.75), "75.00%");
  EXPECT_EQ(mt::format_percent(1.0), "100.00%");
  EXPECT_EQ(mt::format_percent(0.0), "0.00%");
  EXPECT_EQ(mt::format_percent(2.0 / 3.0), "66.67%");
}

TEST(Render, ScoreMentionsPercentage) {
  mt::Responder r(bundled());
  const auto res = mt::make_result(mt::ResultType::score,
                                   {{"metric", "accuracy"}, {"value", 0.75}, {"total", 4}});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto t = r.render(res, seed);
    EXPECT_NE(t.text.find("75.00%"), std::string::npos) << t.text;
    EXPECT_NE(t.text.find("accuracy"), std::string::npos);
    EXPECT_FALSE(t.no_result);
  }
}

TEST(Render, EveryResultTypeIsCoveredAndClean) {
  mt::Responder r(bundled());
  std::set<mt::ResultType> covered;
  std::map<mt::ResultType, std::set<std::string>> texts;
  for (const auto& res : samples()) {
    covered.insert(res.type);
    EXPECT_EQ(res.payload.at("type"), std::string(mt::to_string(res.type)));
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto t = r.render(res, seed);
      EXPECT_FALSE(t.text.empty());
      EXPECT_EQ(t.text, r.render(res, seed).text);
      EXPECT_TRUE(mt::bold_balanced(t.text)) << t.text;
      for (const auto& ph : mt::placeholders_of(res.type)) {
        EXPECT_EQ(t.text.find("{" + ph + "}"), std::string::npos) << t.text;
      }
      texts[res.type].insert(t.text);
    }
  }
  for (auto type : mt::all_result_types()) {
    EXPECT_TRUE(covered.count(type)) << mt::to_string(type);
  }
  // each pool with several variants gets used
  const auto reg = bundled();
  for (const auto& [type, set] : texts) {
    if (reg.variants(type).size() > 1) {
      EXPECT_GT(set.size(), 1u) << mt::to_string(type);
    }
  }
}

TEST(Render, Flags) {
  mt::Responder r(bundled());
  const std::set<mt::ResultType> no_result = {
      mt::ResultType::empty_selection, mt::ResultType::globaltopk_none,
      mt::ResultType::nlpcfe_none,     mt::ResultType::adversarial_failed,
      mt::ResultType::augment_none,    mt::ResultType::similar_none};
  const std::set<mt::ResultType> clarify = {
      mt::ResultType::clarify_intent, mt::ResultType::clarify_id, mt::ResultType::clarify_slot,
      mt::ResultType::clarify_invalid};
  for (const auto& res : samples()) {
    const auto t = r.render(res, 0);
    EXPECT_EQ(t.no_result, no_result.count(res.type) > 0) << mt::to_string(res.type);
    EXPECT_EQ(t.clarification, clarify.count(res.type) > 0) << mt::to_string(res.type);
    EXPECT_EQ(t.payload, res.payload);
  }
  EXPECT_TRUE(r.render(mt::make_result(mt::ResultType::unrecognized), 0).fallback_used);
  auto rat = mt::make_result(mt::ResultType::rationalize,
                             {{"label", "offensive"}, {"rationale", "x"}, {"external", false},
                              {"fallback", true}});
  EXPECT_TRUE(r.render(rat, 0).fallback_used);
  rat.payload["fallback"] = false;
  EXPECT_FALSE(r.render(rat, 0).fallback_used);
  EXPECT_THROW(mt::Responder(mt::TemplateRegistry{}), mt::LoadError);
}

TEST(Render, AugmentBoldsReplacements) {
  mt::Responder r(bundled());
  for (const auto& res : samples()) {
    if (res.type != mt::ResultType::augment) continue;
    const auto t = r.render(res, 1);
    const auto& edits = res.payload["example"]["edits"];
    ASSERT_FALSE(edits.empty());
    for (const auto& e : edits) {
      EXPECT_NE(t.text.find("**" + e["word"].get<std::string>() + "**"), std::string::npos)
          << t.text;
    }
    return;
  }
  FAIL() << "no augment sample";
}

TEST(Render, NoCounterfactualSaysSo) {
  mt::Responder r(bundled());
  const auto res = barren_bench()->run("filter id 0 and nlpcfe 1");
  ASSERT_EQ(res.type, mt::ResultType::nlpcfe_none);
  const auto t = r.render(res, 0);
  EXPECT_TRUE(t.no_result);
  EXPECT_NE(t.text.find("instance 0"), std::string::npos);
}

TEST(Render, CustomTextIsEscaped) {
  mt::Responder r(bundled());
  const auto res = olid_bench()->run("custominput and similar 3", "a ** b * c");
  const auto t = r.render(res, 0);
  EXPECT_TRUE(mt::bold_balanced(t.text));
  EXPECT_NE(t.text.find("your custom input"), std::string::npos) << t.text;
}

TEST(RenderAbout, DeterministicAndListsOps) {
  mt::Responder r(bundled());
  const auto f = r.render_about(mt::ResultType::function);
  EXPECT_EQ(f.text, r.render_about(mt::ResultType::function).text);
  for (const auto& sig : mt::registry()) {
    EXPECT_NE(f.text.find(sig.name), std::string::npos) << sig.name;
  }
  EXPECT_EQ(r.render_about(mt::ResultType::self).text, r.render_about(mt::ResultType::self).text);
  EXPECT_THROW(r.render_about(mt::ResultType::score), mt::ArgumentError);
}

TEST(TemplateRegistry, RejectsBadPools) {
  mt::TemplateRegistry reg;
  EXPECT_THROW(reg.add(mt::ResultType::score, {"{metric} is {bogus}"}), mt::LoadError);
  EXPECT_THROW(reg.add(mt::ResultType::score, {}), mt::LoadError);
  EXPECT_THROW(reg.add(mt::ResultType::self, {"a", "b"}), mt::LoadError);
  EXPECT_NO_THROW(reg.add(mt::ResultType::score, {"{metric}: {value}"}));
  EXPECT_FALSE(reg.complete());
  EXPECT_THROW(reg.variants(mt::ResultType::countdata), std::logic_error);
  EXPECT_TRUE(bundled().complete());
}

TEST(TemplateRegistry, LoadFailsOnMissingOrBadFile) {
  testsupport::TempDir dir;
  for (auto type : mt::all_result_types()) {
    dir.write(std::string(mt::to_string(type)) + ".txt", "# c\nok\n");
  }
  auto reg = mt::TemplateRegistry::load(dir.path());
  EXPECT_EQ(reg.variants(mt::ResultType::score), (std::vector<std::string>{"ok"}));
  dir.write("score.txt", "{nope}\n");
  EXPECT_THROW(mt::TemplateRegistry::load(dir.path()), mt::LoadError);
  std::filesystem::remove(dir.path() / "score.txt");
  EXPECT_THROW(mt::TemplateRegistry::load(dir.path()), mt::LoadError);
}

TEST(FillTemplate, UnknownNamesStay) {
  EXPECT_EQ(mt::fill_template("{a} and {b} {", {{"a", "x"}}), "x and {b} {");
}

TEST(Markup, EscapedTextIsAlwaysBalanced) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab *\\";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto n = rng() % 12;
    for (std::size_t k = 0; k < n; ++k) s += alphabet[rng() % alphabet.size()];
    const auto e = mt::escape_markup(s);
    EXPECT_TRUE(mt::bold_balanced(e)) << s;
    EXPECT_TRUE(mt::bold_balanced("**" + e + "**")) << s;
  }
  EXPECT_FALSE(mt::bold_balanced("**open"));
  EXPECT_TRUE(mt::bold_balanced("\\**not bold"));
}

TEST(TurnResponse, JsonShape) {
  mt::TurnResponse t;
  t.text = "hi";
  t.parse = "countdata";
  t.no_result = true;
  const auto j = t.to_json();
  EXPECT_EQ(j["text"], "hi");
  EXPECT_EQ(j["parse"], "countdata");
  EXPECT_EQ(j["flags"]["no_result"], true);
  EXPECT_EQ(j["flags"]["clarification"], false);
  EXPECT_EQ(j["flags"]["fallback_used"], false);
}

TEST(ResultTypes, NamesRoundTrip) {
  std::set<std::string> names;
  for (auto type : mt::all_result_types()) {
    const auto name = std::string(mt::to_string(type));
    names.insert(name);
    EXPECT_EQ(mt::parse_result_type(name), type);
  }
  EXPECT_EQ(names.size(), mt::all_result_types().size());
  EXPECT_FALSE(mt::parse_result_type("nonsense"));
}
