#include <gtest/gtest.h>

#include <random>
#include <set>

#include "generators.hpp"
#include "modeltalk/errors.hpp"
#include "modeltalk/grammar.hpp"

namespace mt = modeltalk;

namespace {

std::string error_of(const std::string& s) {
  try {
    mt::parse_string(s);
  } catch (const mt::GrammarError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseString, AttributionOnFilteredId) {
  auto t = mt::parse_string("filter id 42 and nlpattribute topk 3");
  ASSERT_EQ(t.clauses.size(), 2u);
  EXPECT_EQ(t.connectives, (std::vector<mt::Connective>{mt::Connective::and_}));
  EXPECT_EQ(t.filter_id(), 42);
  ASSERT_NE(t.action(), nullptr);
  EXPECT_EQ(t.action()->op, mt::OpName::nlpattribute);
}

TEST(ParseString, OrBetweenFilters) {
  auto t = mt::parse_string("includes \"ugly\" or filter id 3 and countdata");
  ASSERT_EQ(t.clauses.size(), 3u);
  EXPECT_EQ(t.connectives[0], mt::Connective::or_);
  EXPECT_EQ(t.connectives[1], mt::Connective::and_);
  EXPECT_EQ(std::get<mt::QuotedString>(t.clauses[0].args[0]).value, "ugly");
}

TEST(ParseString, ActionMustBeLast) {
  try {
    mt::parse_string("nlpattribute and filter id 3");
    FAIL();
  } catch (const mt::GrammarError& e) {
    EXPECT_NE(std::string(e.what()).find("action clause must be last"), std::string::npos);
    EXPECT_EQ(e.position(), 0u);
  }
}

TEST(ParseString, PositionedErrors) {
  try {
    mt::parse_string("filter id 3 and frobnicate");
    FAIL();
  } catch (const mt::GrammarError& e) {
    EXPECT_EQ(e.position(), 4u);
  }
  EXPECT_NE(error_of("show or countdata").find("action clause must be last"), std::string::npos);
  EXPECT_NE(error_of("filter id 1 or countdata").find("'or' may only join filter clauses"),
            std::string::npos);
  EXPECT_NE(error_of("filter id x").find("expects an integer"), std::string::npos);
  EXPECT_NE(error_of("nlpcfe").find("needs a single instance"), std::string::npos);
  EXPECT_NE(error_of("custominput and nlpcfe").find("does not support custom input"),
            std::string::npos);
  EXPECT_NE(error_of("score bleu").find("expects one of"), std::string::npos);
  EXPECT_NE(error_of("includes \"open").find("unterminated"), std::string::npos);
  EXPECT_NE(error_of("").find("empty parse"), std::string::npos);
}

TEST(Canonicalize, Normalizes) {
  EXPECT_EQ(mt::canonical_form("FILTER  ID 042   and SHOW"), "filter id 42 and show");
  EXPECT_EQ(mt::canonical_form("mistakes"), "mistakes count");
  EXPECT_EQ(mt::canonical_form("mistakes sample"), "mistakes sample 3");
  EXPECT_EQ(mt::canonical_form("filter id 1 and nlpattribute"), "filter id 1 and nlpattribute topk 3");
  EXPECT_EQ(mt::canonical_form("filter id 1 and nlpcfe"), "filter id 1 and nlpcfe 1");
  EXPECT_EQ(mt::canonical_form("globaltopk"), "globaltopk 3");
  EXPECT_EQ(mt::canonical_form("keywords"), "keywords 5");
  EXPECT_EQ(mt::canonical_form("includes \"a \\\"b\\\"\" and countdata"),
            "includes \"a \\\"b\\\"\" and countdata");
}

TEST(Canonicalize, SingleOpGoldParsesRoundTrip) {
  const std::vector<std::string> gold = {
      "filter id 3",
      "includes \"ugly\"",
      "custominput",
      "predict",
      "filter id 3 and likelihood",
      "mistakes count",
      "score f1",
      "filter id 3 and show",
      "countdata",
      "label",
      "data test",
      "model",
      "function",
      "self",
      "filter id 3 and nlpattribute all sentence",
      "globaltopk 5 class \"offensive\"",
      "filter id 3 and nlpcfe 2",
      "filter id 3 and adversarial",
      "filter id 3 and augment",
      "filter id 3 and rationalize",
      "keywords 10",
      "custominput and similar 2",
      "filter id 1 or filter id 2",
      "filter id 1 and filter id 1",
  };
  std::set<mt::OpName> covered;
  for (const auto& g : gold) {
    auto t = mt::parse_string(g);
    EXPECT_EQ(mt::canonicalize(t), g);
    EXPECT_EQ(mt::parse_string(mt::canonicalize(t)), t);
    EXPECT_EQ(mt::canonical_form(mt::canonical_form(g)), mt::canonical_form(g));
    for (const auto& c : t.clauses) covered.insert(c.op);
  }
  EXPECT_EQ(covered.size(), mt::kClauseOpCount);
}

TEST(Registry, Inventory) {
  const auto& r = mt::registry();
  EXPECT_EQ(r.size(), 24u);
  std::set<std::string> names;
  for (const auto& s : r) names.insert(s.name);
  EXPECT_EQ(names.size(), 24u);
  EXPECT_TRUE(names.count("and") && names.count("or"));

  const auto* cfe = mt::find_signature("nlpcfe");
  ASSERT_NE(cfe, nullptr);
  ASSERT_EQ(cfe->optional_slots.size(), 1u);
  EXPECT_EQ(cfe->optional_slots[0].name, "number");
  EXPECT_EQ(cfe->optional_slots[0].default_value, "1");

  const auto* score = mt::find_signature("score");
  ASSERT_NE(score, nullptr);
  ASSERT_EQ(score->required_slots.size(), 1u);
  EXPECT_EQ(score->required_slots[0].name, "metric");

  std::set<std::string> custom;
  for (const auto& s : r) {
    if (s.supports_custom_input) custom.insert(s.name);
  }
  EXPECT_EQ(custom, (std::set<std::string>{"predict", "nlpattribute", "similar", "custominput"}));

  const std::set<std::string> slot_types = {"id",     "number",       "class_names",
                                            "data_type", "metric",    "include_token",
                                            "sentence_level"};
  for (const auto& s : r) {
    for (const auto& sl : s.required_slots) EXPECT_TRUE(slot_types.count(sl.name)) << sl.name;
    for (const auto& sl : s.optional_slots) EXPECT_TRUE(slot_types.count(sl.name)) << sl.name;
  }
}

TEST(RoundTrip, RandomValidTrees) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const auto tree = testsupport::random_valid_tree(rng);
    const auto text = mt::canonicalize(tree);
    mt::ParseTree back;
    ASSERT_NO_THROW(back = mt::parse_string(text)) << text;
    EXPECT_EQ(back, tree) << text;
    EXPECT_EQ(mt::canonicalize(back), text);
    EXPECT_NO_THROW(mt::validate(tree));
  }
}

TEST(RoundTrip, ExactMatchIffCanonicalEqual) {
  std::mt19937_64 rng(99);
  std::vector<mt::ParseTree> trees;
  for (int i = 0; i < 150; ++i) trees.push_back(testsupport::random_valid_tree(rng));
  trees.push_back(trees[0]);
  for (const auto& a : trees) {
    for (const auto& b : trees) {
      EXPECT_EQ(a == b, mt::canonicalize(a) == mt::canonicalize(b));
    }
  }
}

TEST(Fuzz, EitherValidOrPositionedError) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> vocab = {
      "filter", "id",  "and", "or",  "includes", "\"x\"", "\"", "custominput", "predict",
      "nlpcfe", "3",   "-1",  "042", "topk",     "all",   "sentence",        "class",
      "score",  "f1",  "show", "mistakes", "sample", "globaltopk", "\\", "similar", "AND", "0"};
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const auto n = rng() % 7;
    for (std::size_t k = 0; k < n; ++k) s += vocab[rng() % vocab.size()] + " ";
    try {
      auto t = mt::parse_string(s);
      EXPECT_EQ(mt::parse_string(mt::canonicalize(t)), t) << s;
    } catch (const mt::GrammarError& e) {
      EXPECT_LE(e.position(), n + 1) << s;
    }
  }
}

TEST(Validate, RejectsDenormalizedTree) {
  mt::ParseTree t;
  t.clauses.push_back({mt::OpName::mistakes, {}});
  EXPECT_THROW(mt::validate(t), mt::GrammarError);
}
