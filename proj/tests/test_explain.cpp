#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "modeltalk/errors.hpp"
#include "modeltalk/explain.hpp"
#include "modeltalk/respond.hpp"
#include "support.hpp"

namespace mt = modeltalk;
using testsupport::make_binary_model;
using testsupport::make_dataset;

namespace {

// Random model over words w0..w(n-1) plus random texts drawn from them and
// a few OOV words.
struct RandomCase {
  mt::LinearTextModel model;
  std::string text;
  std::size_t target;
};

RandomCase random_case(std::mt19937_64& rng) {
  const std::size_t classes = 2 + rng() % 3, vocab = 3 + rng() % 10;
  std::vector<std::string> words, names;
  for (std::size_t i = 0; i < vocab; ++i) words.push_back("w" + std::to_string(i));
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  auto real = [&] { return static_cast<double>(rng() % 20001) / 1000.0 - 10.0; };
  std::vector<std::vector<double>> w(classes, std::vector<double>(vocab));
  std::vector<double> b(classes);
  for (auto& row : w)
    for (auto& x : row) x = real();
  for (auto& x : b) x = real();
  std::string text;
  const auto n = 1 + rng() % 15;
  for (std::size_t i = 0; i < n; ++i) {
    text += (rng() % 6 == 0 ? std::string("oov") : words[rng() % vocab]);
    text += rng() % 5 == 0 ? ". " : " ";
  }
  return {mt::LinearTextModel(words, names, w, b), text, static_cast<std::size_t>(rng() % classes)};
}

std::string join_words(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.empty()) continue;
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

mt::SynonymLexicon small_lexicon() {
  return mt::SynonymLexicon({{"ugly", {"unattractive", "hideous"}},
                             {"bad", {"poor", "awful"}},
                             {"stupid", {"foolish"}},
                             {"nice", {"pleasant"}},
                             {"day", {"afternoon"}}},
                            {{"ugly", {"beautiful"}}});
}

class DownBackend : public mt::RationaleBackend {
 public:
  std::optional<std::string> complete(const std::string&) override { return std::nullopt; }
};

class EchoBackend : public mt::RationaleBackend {
 public:
  std::string last_prompt;
  std::optional<std::string> complete(const std::string& prompt) override {
    last_prompt = prompt;
    return std::string("because reasons");
  }
};

}  // namespace

// ---------------------------------------------------------------- attribution

TEST(IntegratedGradients, CompletenessOnRandomCases) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    auto c = random_case(rng);
    mt::AttributionOptions o;
    o.topk = std::nullopt;
    const auto a = mt::nlpattribute(c.model, c.text, c.target, o);
    const auto x = c.model.features(mt::tokenize(c.text));
    const double expected = c.model.logit(x, c.target) - c.model.bias(c.target);
    EXPECT_LE(std::abs(a.total() - expected), 1e-6) << c.text;
  }
}

TEST(IntegratedGradients, LinearEqualsWeightsTimesCountsAndOovIsZero) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    auto c = random_case(rng);
    mt::AttributionOptions o;
    o.topk = std::nullopt;
    const auto a = mt::nlpattribute(c.model, c.text, c.target, o);
    const auto tt = mt::tokenize(c.text);
    ASSERT_EQ(a.token_scores.size(), tt.size());
    for (std::size_t k = 0; k < tt.size(); ++k) {
      auto f = c.model.feature_index(tt.tokens[k]);
      if (!f) {
        EXPECT_EQ(a.token_scores[k], 0.0);
        continue;
      }
      // per feature: w * count, split equally over occurrences
      const double count = tt.counts.at(tt.tokens[k]);
      EXPECT_NEAR(a.token_scores[k] * count, c.model.weight(c.target, *f) * count, 1e-9);
    }
  }
}

TEST(IntegratedGradients, StepCountsAgree) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto c = random_case(rng);
    std::vector<std::vector<double>> runs;
    for (std::size_t steps : {1u, 8u, 32u}) {
      mt::AttributionOptions o;
      o.topk = std::nullopt;
      o.ig_steps = steps;
      runs.push_back(mt::nlpattribute(c.model, c.text, c.target, o).token_scores);
    }
    for (std::size_t k = 0; k < runs[0].size(); ++k) {
      EXPECT_NEAR(runs[0][k], runs[1][k], 1e-9);
      EXPECT_NEAR(runs[0][k], runs[2][k], 1e-9);
    }
  }
}

TEST(IntegratedGradients, GenericTemplateOnQuadratic) {
  // f(x) = sum x_i^2: IG from 0 attributes x_i^2 exactly under the midpoint rule.
  mt::SparseVector x = {{0, 1.5}, {3, -2.0}, {7, 0.5}};
  auto grad = [](const mt::SparseVector& p) {
    mt::SparseVector g;
    for (const auto& [i, v] : p) g.emplace_back(i, 2 * v);
    return g;
  };
  for (std::size_t steps : {1u, 4u, 64u}) {
    const auto a = mt::integrated_gradients(x, {}, steps, grad);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[k].second, x[k].second * x[k].second, 1e-12);
  }
}

TEST(Nlpattribute, TopThreeInsults) {
  auto model = make_binary_model(
      {{"liar", 2.5}, {"fat", 2.0}, {"ugly", 3.0}, {"she", 0.2}, {"is", 0.1}, {"everyone", -0.3}});
  const auto a = mt::nlpattribute(
      model, "ibelieveblaseyford is liar she is fat ugly and everyone knows it", 1);
  ASSERT_EQ(a.top.size(), 3u);
  std::set<std::string> top;
  for (auto i : a.top) top.insert(a.tokens[i]);
  EXPECT_EQ(top, (std::set<std::string>{"fat", "ugly", "liar"}));
  EXPECT_EQ(a.tokens[a.top[0]], "ugly");
}

TEST(Nlpattribute, SentenceLevelSumsTokenScores) {
  auto model = make_binary_model({{"ugly", 3.0}, {"nice", -1.0}, {"day", 0.5}});
  mt::AttributionOptions o;
  o.level = mt::AttributionLevel::sentence;
  o.topk = std::nullopt;
  const auto a = mt::nlpattribute(model, "nice day! she is ugly. ugly ugly?", 1, o);
  ASSERT_EQ(a.sentence_scores.size(), 3u);
  EXPECT_NEAR(a.sentence_scores[0], -0.5, 1e-12);
  EXPECT_NEAR(a.sentence_scores[1], 3.0, 1e-12);
  EXPECT_NEAR(a.sentence_scores[2], 6.0, 1e-12);
  EXPECT_EQ(a.top.front(), 2u);
  EXPECT_EQ(a.top.size(), 3u);
}

TEST(Nlpattribute, NothingToAttribute) {
  auto model = make_binary_model({{"a", 1.0}});
  try {
    mt::nlpattribute(model, "  ... ", 0);
    FAIL();
  } catch (const mt::ArgumentError& e) {
    EXPECT_STREQ(e.what(), "nothing to attribute");
  }
}

TEST(Globaltopk, MatchesBruteForceMean) {
  auto model = mt::train(testsupport::olid(), {});
  const auto ds = testsupport::olid();
  for (std::size_t cls = 0; cls < 2; ++cls) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& inst : ds.instances()) {
      mt::AttributionOptions o;
      o.topk = std::nullopt;
      const auto a = mt::nlpattribute(model, inst.text(), cls, o);
      for (std::size_t k = 0; k < a.tokens.size(); ++k) {
        acc[a.tokens[k]].first += a.token_scores[k];
        ++acc[a.tokens[k]].second;
      }
    }
    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& [t, v] : acc) {
      if (v.second >= 2) oracle.push_back({v.first / v.second, t});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const auto got = mt::globaltopk(model, ds, 10, cls);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_NEAR(got[k].mean, oracle[k].first, 1e-9);
      if (k + 1 < got.size() && std::abs(oracle[k].first - oracle[k + 1].first) > 1e-9) {
        EXPECT_EQ(got[k].token, oracle[k].second);
      }
    }
  }
}

TEST(Globaltopk, FixtureCases) {
  auto model = make_binary_model({{"ugly", 4.0}, {"liar", 1.0}, {"nice", -1.0}, {"rare", 9.0}});
  auto ds = make_dataset({{"ugly liar", 1}, {"so ugly", 1}, {"nice liar", 0}, {"rare", 1}});
  auto top = mt::globaltopk(model, ds, 2, 1);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].token, "ugly");
  EXPECT_EQ(top[0].occurrences, 2u);
  // only ugly and liar occur twice
  EXPECT_EQ(mt::globaltopk(model, ds, 50, 1).size(), 2u);
  auto zeros = mt::globaltopk(model, ds, 50, 0);
  ASSERT_EQ(zeros.size(), 2u);
  EXPECT_EQ(zeros[0].token, "liar");
  EXPECT_EQ(zeros[0].mean, 0.0);
  EXPECT_EQ(zeros[1].token, "ugly");
}

TEST(Verbalize, PositionAndGlobalComparison) {
  auto model = make_binary_model({{"ugly", 3.0}, {"nice", -1.0}, {"day", 0.5}});
  const auto a = mt::nlpattribute(model, "she is ugly. nice day. what weather.", 1);
  std::vector<mt::GlobalAttribution> global = {{"day", 0.5, 3}};
  const auto lines = mt::verbalize_attribution(a, global);
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines[0], "The first sentence contains the most salient token.");
  bool compared = false;
  for (const auto& l : lines) {
    compared |= l.find("more salient for this instance than it is across the dataset") !=
                std::string::npos;
  }
  EXPECT_TRUE(compared);

  const auto single = mt::nlpattribute(model, "she is ugly", 1);
  for (const auto& l : mt::verbalize_attribution(single, global)) {
    EXPECT_EQ(l.find("sentence contains"), std::string::npos);
  }
  const auto last = mt::nlpattribute(model, "nice day. she is ugly", 1);
  EXPECT_EQ(mt::verbalize_attribution(last, global)[0],
            "The last sentence contains the most salient token.");
}

// ---------------------------------------------------------------- lexicon

TEST(Lexicon, LoadRules) {
  testsupport::TempDir dir;
  auto syn = dir.write("s.tsv", "# c\nUgly\tugly,Hideous,two words,hideous,unattractive\n");
  auto ant = dir.write("a.tsv", "ugly\tbeautiful\n");
  auto lex = mt::SynonymLexicon::load(syn, ant);
  EXPECT_EQ(lex.synonyms("UGLY"), (std::vector<std::string>{"hideous", "unattractive"}));
  EXPECT_EQ(lex.antonyms("ugly"), (std::vector<std::string>{"beautiful"}));
  EXPECT_TRUE(lex.synonyms("missing").empty());
}

TEST(Lexicon, BundledHasNoSelfMappings) {
  auto lex = mt::SynonymLexicon::load(testsupport::data_dir() / "lexicon" / "synonyms.tsv",
                                      testsupport::data_dir() / "lexicon" / "antonyms.tsv");
  EXPECT_GT(lex.size(), 300u);
  std::ifstream in(testsupport::data_dir() / "lexicon" / "synonyms.tsv");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto word = mt::to_lower(mt::trim(line.substr(0, line.find('\t'))));
    for (const auto& s : lex.synonyms(word)) EXPECT_NE(s, word);
  }
}

// ---------------------------------------------------------------- edits

TEST(ApplyEdits, ReproducesTextAndValidates) {
  auto model = make_binary_model({{"ugly", 1.0}});
  const std::string text = "She is UGLY, really ugly!";
  const auto tt = mt::tokenize(text);
  auto e = mt::apply_edits(model, text, tt,
                           {{2, mt::EditKind::substitute, "plain"}, {3, mt::EditKind::remove, ""}});
  EXPECT_EQ(e.text, "She is plain, ugly!");
  EXPECT_EQ(e.marked_text, "She is **plain**, ugly!");
  EXPECT_TRUE(mt::bold_balanced(e.marked_text));
  EXPECT_EQ(mt::apply_edits(model, text, tt, {}).text, text);
  EXPECT_THROW(mt::apply_edits(model, text, tt, {{9, mt::EditKind::remove, ""}}), mt::ArgumentError);
  EXPECT_THROW(mt::apply_edits(model, text, tt,
                               {{1, mt::EditKind::remove, ""}, {1, mt::EditKind::remove, ""}}),
               mt::ArgumentError);
  const auto two = mt::tokenize("q [SEP] p");
  EXPECT_THROW(mt::apply_edits(model, "q [SEP] p", two, {{1, mt::EditKind::remove, ""}}),
               mt::ArgumentError);
}

TEST(ApplyEdits, EscapesLiteralAsterisks) {
  auto model = make_binary_model({{"ugly", 1.0}});
  const std::string text = "a*b ugly **c";
  auto e = mt::apply_edits(model, text, mt::tokenize(text), {{1, mt::EditKind::substitute, "x"}});
  EXPECT_TRUE(mt::bold_balanced(e.marked_text));
}

// ---------------------------------------------------------------- counterfactuals

TEST(Counterfactual, OneEditOptimalAgainstBruteForce) {
  auto model = make_binary_model({{"ugly", 5.0}, {"she", 0.5}, {"so", 0.2}, {"hideous", 4.0},
                                  {"unattractive", 0.4}, {"beautiful", -1.0}},
                                 1.0, 0.0);
  const auto lex = small_lexicon();
  const std::vector<std::string> tokens = {"she", "is", "so", "ugly"};
  const std::string text = "she is so ugly";
  const auto original = model.predict(text).index;
  ASSERT_EQ(original, 1u);

  // Oracle: every single deletion or lexicon substitution.
  double best_p = -1;
  std::string best_text;
  std::set<std::string> flips;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<std::string> subs = {""};
    for (const auto& w : lex.synonyms(tokens[i])) subs.push_back(w);
    for (const auto& w : lex.antonyms(tokens[i])) subs.push_back(w);
    for (const auto& s : subs) {
      auto edited = tokens;
      edited[i] = s;
      const auto t = join_words(edited);
      const auto p = model.likelihood(t);
      if (mt::argmax(p) != original) {
        flips.insert(t);
        if (p[mt::argmax(p)] > best_p) {
          best_p = p[mt::argmax(p)];
          best_text = t;
        }
      }
    }
  }
  ASSERT_FALSE(flips.empty());
  const auto r = mt::nlpcfe(model, lex, text, {});
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].edits.size(), 1u);
  EXPECT_EQ(r.results[0].text, best_text);
  EXPECT_NE(r.results[0].prediction.index, original);

  mt::CounterfactualOptions all;
  all.number = 50;
  const auto many = mt::nlpcfe(model, lex, text, all);
  std::set<std::string> one_edit;
  for (const auto& e : many.results) {
    if (e.edits.size() == 1) one_edit.insert(e.text);
  }
  EXPECT_EQ(one_edit, flips);
}

TEST(Counterfactual, NoFlipWhenBiasOverwhelms) {
  auto model = make_binary_model({{"ugly", 1.0}, {"bad", 1.0}, {"stupid", 1.0}}, 0.0, 100.0);
  const auto lex = small_lexicon();
  const std::vector<std::string> tokens = {"ugly", "bad", "stupid", "day"};
  // Exhaustive oracle over every edit set of size <= 3.
  std::vector<std::vector<std::string>> choices;
  for (const auto& t : tokens) {
    std::vector<std::string> c = {t, ""};
    for (const auto& w : lex.synonyms(t)) c.push_back(w);
    for (const auto& w : lex.antonyms(t)) c.push_back(w);
    choices.push_back(c);
  }
  std::size_t checked = 0;
  std::vector<std::size_t> pick(4, 0);
  while (true) {
    std::size_t edits = 0;
    std::vector<std::string> t;
    for (std::size_t i = 0; i < 4; ++i) {
      edits += pick[i] != 0;
      t.push_back(choices[i][pick[i]]);
    }
    if (edits <= 3) {
      ++checked;
      ASSERT_EQ(model.predict(join_words(t)).index, 1u);
    }
    std::size_t k = 0;
    while (k < 4 && ++pick[k] == choices[k].size()) pick[k++] = 0;
    if (k == 4) break;
  }
  EXPECT_GT(checked, 50u);
  EXPECT_TRUE(mt::nlpcfe(model, lex, "ugly bad stupid day", {}).results.empty());
}

TEST(Counterfactual, DistinctResults) {
  auto model = make_binary_model({{"ugly", 2.0}, {"bad", 2.0}}, 1.0, 0.0);
  mt::CounterfactualOptions o;
  o.number = 2;
  const auto r = mt::nlpcfe(model, small_lexicon(), "ugly and bad", o);
  ASSERT_EQ(r.results.size(), 2u);
  EXPECT_NE(r.results[0].edits, r.results[1].edits);
  EXPECT_NE(r.results[0].text, r.results[1].text);
  EXPECT_THROW(mt::nlpcfe(model, small_lexicon(), "x", {0}), mt::ArgumentError);
}

TEST(Counterfactual, EveryResultFlipsOnBundledData) {
  const auto ds = testsupport::olid();
  const auto model = mt::train(ds, {});
  const auto lex = mt::SynonymLexicon::load(testsupport::data_dir() / "lexicon" / "synonyms.tsv",
                                            testsupport::data_dir() / "lexicon" / "antonyms.tsv");
  mt::CounterfactualOptions o;
  o.number = 3;
  std::size_t results = 0;
  for (const auto& inst : ds.instances()) {
    const auto r = mt::nlpcfe(model, lex, inst.text(), o);
    for (const auto& e : r.results) {
      ++results;
      EXPECT_NE(model.predict(e.text).index, r.original.index) << e.text;
      std::set<std::size_t> pos;
      for (const auto& ed : e.edits) pos.insert(ed.position);
      EXPECT_EQ(pos.size(), e.edits.size());
      EXPECT_TRUE(mt::bold_balanced(e.marked_text));
    }
  }
  EXPECT_GT(results, 0u);
}

// ---------------------------------------------------------------- adversarial

TEST(Adversarial, SingleSubstitutionFixture) {
  auto model = make_binary_model({{"bad", 3.0}, {"movie", 0.1}}, 1.0, 0.0);
  const auto r = mt::adversarial(model, small_lexicon(), "a bad movie", 1);
  ASSERT_EQ(r.status, mt::AdversarialResult::Status::success);
  ASSERT_TRUE(r.example);
  EXPECT_EQ(r.example->edits.size(), 1u);
  EXPECT_EQ(r.example->edits[0].kind, mt::EditKind::substitute);
  EXPECT_EQ(r.example->prediction.index, 0u);
  EXPECT_EQ(r.example->text, "a poor movie");
}

TEST(Adversarial, AlreadyMisclassified) {
  auto model = make_binary_model({{"bad", 3.0}}, 1.0, 0.0);
  const auto r = mt::adversarial(model, small_lexicon(), "a bad movie", 0);
  EXPECT_EQ(r.status, mt::AdversarialResult::Status::already_misclassified);
  EXPECT_EQ(r.substitutions_tried, 0u);
}

TEST(Adversarial, DominatesSingleSubstitutionOracle) {
  std::mt19937_64 rng(21);
  std::size_t oracle_successes = 0, instances = 0;
  while (instances < 20) {
    std::vector<std::string> words;
    for (int i = 0; i < 10; ++i) words.push_back("w" + std::to_string(i));
    std::map<std::string, std::vector<std::string>> syn;
    for (const auto& w : words) {
      for (int k = 0; k < 2; ++k) {
        const auto& s = words[rng() % words.size()];
        if (s != w) syn[w].push_back(s);
      }
    }
    mt::SynonymLexicon lex(syn);
    std::vector<double> w1;
    for (std::size_t i = 0; i < words.size(); ++i) {
      w1.push_back(static_cast<double>(rng() % 4001) / 1000.0 - 2.0);
    }
    std::vector<std::pair<std::string, double>> ws;
    for (std::size_t i = 0; i < words.size(); ++i) ws.push_back({words[i], w1[i]});
    auto model = make_binary_model(ws);
    std::vector<std::string> tokens;
    for (int k = 0; k < 5; ++k) tokens.push_back(words[rng() % words.size()]);
    const auto text = join_words(tokens);
    const auto gold = model.predict(text).index;

    bool oracle = false;
    for (std::size_t i = 0; i < tokens.size() && !oracle; ++i) {
      for (const auto& s : lex.synonyms(tokens[i])) {
        auto t = tokens;
        t[i] = s;
        if (model.predict(join_words(t)).index != gold) oracle = true;
      }
    }
    ++instances;
    const auto r = mt::adversarial(model, lex, text, gold);
    if (oracle) {
      ++oracle_successes;
      EXPECT_EQ(r.status, mt::AdversarialResult::Status::success) << text;
    }
    if (r.example) EXPECT_NE(model.predict(r.example->text).index, gold);
  }
  EXPECT_GE(oracle_successes, 5u);
}

// ---------------------------------------------------------------- augment

TEST(Augment, CountIsCeilOfRatio) {
  EXPECT_EQ(mt::augment_count(10), 3u);
  EXPECT_EQ(mt::augment_count(1), 1u);
  EXPECT_EQ(mt::augment_count(0), 0u);
  for (std::size_t n = 1; n <= 100; ++n) {
    // integer oracle: ceil(3n/10)
    EXPECT_EQ(mt::augment_count(n), (3 * n + 9) / 10) << n;
  }
}

TEST(Augment, TenEligibleReplacesThree) {
  std::map<std::string, std::vector<std::string>> syn;
  std::vector<std::pair<std::string, double>> ws;
  std::string text = "the";
  for (int i = 0; i < 10; ++i) {
    const auto w = "word" + std::to_string(i);
    syn[w] = {"alt" + std::to_string(i)};
    text += " " + w + " and";
  }
  syn["the"] = {"a"};
  mt::SynonymLexicon lex(syn);
  auto model = make_binary_model({{"word1", 1.0}});
  const auto r = mt::augment(model, lex, text, 5);
  EXPECT_EQ(r.eligible, 10u);
  ASSERT_TRUE(r.edited);
  EXPECT_EQ(r.edited->edits.size(), 3u);
  for (const auto& e : r.edited->edits) {
    EXPECT_FALSE(mt::is_stopword(r.edited->original_tokens[e.position]));
  }
  EXPECT_TRUE(mt::bold_balanced(r.edited->marked_text));
  const auto again = mt::augment(model, lex, text, 5);
  EXPECT_EQ(again.edited->text, r.edited->text);

  const auto one = mt::augment(model, lex, "the word3 and the", 1);
  ASSERT_TRUE(one.edited);
  EXPECT_EQ(one.edited->edits.size(), 1u);
  EXPECT_EQ(one.edited->text, "the alt3 and the");
  EXPECT_EQ(one.edited->marked_text, "the **alt3** and the");

  EXPECT_FALSE(mt::augment(model, lex, "the and", 1).edited);
}

TEST(Augment, BundledFixturesAndSeparator) {
  const auto ds = testsupport::olid();
  const auto model = mt::train(ds, {});
  const auto lex = mt::SynonymLexicon::load(testsupport::data_dir() / "lexicon" / "synonyms.tsv");
  for (const auto& inst : ds.instances()) {
    const auto r = mt::augment(model, lex, inst.text(), 7);
    if (!r.edited) continue;
    EXPECT_EQ(r.edited->edits.size(), mt::augment_count(r.eligible));
    EXPECT_TRUE(mt::bold_balanced(r.edited->marked_text));
  }
  const auto tt = mt::tokenize("ugly [SEP] ugly");
  const auto el = mt::augment_eligible(tt, small_lexicon());
  EXPECT_EQ(el, (std::vector<std::size_t>{0, 2}));
}

// ---------------------------------------------------------------- similarity

namespace {

// Independent TF-IDF: raw counts, smoothed idf, L2 normalization.
std::vector<std::map<std::string, double>> oracle_vectors(const mt::Dataset& ds) {
  auto terms = [](const std::string& text) {
    const auto tt = mt::tokenize(text);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tt.size(); ++i) {
      if (tt.is_separator(i)) continue;
      out.push_back(tt.tokens[i]);
      if (i + 1 < tt.size() && !tt.is_separator(i + 1)) {
        out.push_back(tt.tokens[i] + " " + tt.tokens[i + 1]);
      }
    }
    return out;
  };
  std::map<std::string, double> df;
  for (const auto& inst : ds.instances()) {
    auto t = terms(inst.text());
    for (const auto& u : std::set<std::string>(t.begin(), t.end())) df[u] += 1;
  }
  const double n = static_cast<double>(ds.size());
  std::vector<std::map<std::string, double>> out;
  for (const auto& inst : ds.instances()) {
    std::map<std::string, double> v;
    for (const auto& t : terms(inst.text())) v[t] += 1;
    double norm = 0;
    for (auto& [t, x] : v) {
      x *= std::log((1 + n) / (1 + df[t])) + 1;
      norm += x * x;
    }
    for (auto& [t, x] : v) x /= std::sqrt(norm);
    out.push_back(v);
  }
  return out;
}

double oracle_cos(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  double s = 0;
  for (const auto& [t, x] : a) {
    auto it = b.find(t);
    if (it != b.end()) s += x * it->second;
  }
  return s;
}

}  // namespace

TEST(Similarity, TwinRanksFirst) {
  auto ds = make_dataset({{"what a joke", 1}, {"nice day", 0}, {"what a joke", 0}, {"a joke", 1}});
  mt::SimilarityIndex index(ds);
  const auto r = index.similar_to(0, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].id, 2);
  EXPECT_NEAR(r[0].cosine, 1.0, 1e-9);
}

TEST(Similarity, SelfExclusionAndBruteForceRanking) {
  const auto ds = testsupport::olid();
  mt::SimilarityIndex index(ds);
  const auto vecs = oracle_vectors(ds);
  const auto& inst = ds.instances();
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto r = index.similar_to(inst[i].id, ds.size());
    ASSERT_EQ(r.size(), ds.size() - 1);
    std::vector<std::pair<double, mt::InstanceId>> oracle;
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (j != i) oracle.push_back({oracle_cos(vecs[i], vecs[j]), inst[j].id});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (std::abs(a.first - b.first) > 1e-12) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t k = 0; k < r.size(); ++k) {
      EXPECT_NE(r[k].id, inst[i].id);
      EXPECT_GE(r[k].cosine, -1.0);
      EXPECT_LE(r[k].cosine, 1.0);
      EXPECT_NEAR(r[k].cosine, oracle[k].first, 1e-12);
      EXPECT_EQ(r[k].id, oracle[k].second);
    }
  }
}

TEST(Similarity, CustomTextQuery) {
  auto ds = make_dataset({{"what a joke", 1}, {"nice day", 0}});
  mt::SimilarityIndex index(ds);
  const auto r = index.query("such a nice day", 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].id, 1);
  EXPECT_THROW(index.query("x", 0), mt::ArgumentError);
}

// ---------------------------------------------------------------- keywords

TEST(Keywords, Frequencies) {
  auto ds = make_dataset({{"the president said the president", 0},
                          {"the president and the president met the president", 1},
                          {"the vote", 0}});
  const auto k = mt::keywords(ds, mt::select_all(ds), 2);
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].token, "president");
  EXPECT_EQ(k[0].count, 5u);
  const auto all = mt::keywords(ds, mt::select_all(ds), 100);
  EXPECT_EQ(all.size(), 4u);  // president, said, met, vote
  for (const auto& kw : all) EXPECT_NE(kw.token, "the");
  EXPECT_EQ(all[1].token, "met");  // ties: lexicographic
  EXPECT_EQ(mt::stopwords().size(), 127u);
}

// ---------------------------------------------------------------- rationale

TEST(Rationale, BuiltInNamesLabelAndTokens) {
  auto model = make_binary_model({{"liar", 2.5}, {"fat", 2.0}, {"ugly", 3.0}});
  const std::string text = "she is a fat ugly liar";
  const auto pred = model.predict(text);
  const auto attr = mt::nlpattribute(model, text, pred.index);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto r = mt::rationalize(text, pred, attr, nullptr, seed);
    EXPECT_FALSE(r.fallback);
    EXPECT_FALSE(r.external);
    EXPECT_NE(r.text.find("offensive"), std::string::npos);
    for (const auto* w : {"fat", "ugly", "liar"}) {
      EXPECT_NE(r.text.find(std::string("**") + w + "**"), std::string::npos) << r.text;
    }
    EXPECT_TRUE(mt::bold_balanced(r.text));
  }
}

TEST(Rationale, SingleTokenAndBackends) {
  auto model = make_binary_model({{"ugly", 3.0}});
  const auto pred = model.predict("ugly");
  const auto attr = mt::nlpattribute(model, "ugly", pred.index);
  const auto one = mt::rationalize("ugly", pred, attr, nullptr, 0);
  EXPECT_NE(one.text.find("the word **ugly**"), std::string::npos) << one.text;

  DownBackend down;
  const auto fb = mt::rationalize("ugly", pred, attr, &down, 0);
  EXPECT_TRUE(fb.fallback);
  EXPECT_EQ(fb.text, one.text);

  EchoBackend echo;
  const auto ext = mt::rationalize("ugly", pred, attr, &echo, 0);
  EXPECT_TRUE(ext.external);
  EXPECT_EQ(ext.text, "because reasons");
  EXPECT_EQ(echo.last_prompt, mt::rationale_prompt("ugly", "offensive"));
  EXPECT_NE(echo.last_prompt.find("ugly"), std::string::npos);
  EXPECT_NE(echo.last_prompt.find("offensive"), std::string::npos);
}

TEST(Rationale, HttpBackendUnreachableFallsBack) {
  mt::HttpRationaleBackend backend("http://127.0.0.1:9/complete", std::chrono::milliseconds(300));
  EXPECT_FALSE(backend.complete("hello").has_value());
}
