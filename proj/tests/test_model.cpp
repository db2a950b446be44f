#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "modeltalk/errors.hpp"
#include "support.hpp"

namespace mt = modeltalk;
using testsupport::make_binary_model;
using testsupport::make_dataset;

namespace {

mt::Dataset separable() {
  return make_dataset({{"you are ugly", 1},
                       {"ugly stupid liar", 1},
                       {"stupid idiot", 1},
                       {"have a nice day", 0},
                       {"lovely weather today", 0},
                       {"nice work friend", 0}});
}

// Perceptron on the count features: converges iff the fixture is linearly separable.
bool perceptron_separable(const mt::Dataset& ds) {
  std::map<std::string, double> w;
  double b = 0;
  for (int epoch = 0; epoch < 1000; ++epoch) {
    bool clean = true;
    for (const auto& inst : ds.instances()) {
      const double y = inst.gold_label == 1 ? 1 : -1;
      double s = b;
      const auto counts = mt::tokenize(inst.text()).counts;
      for (const auto& [t, c] : counts) s += w[t] * c;
      if (y * s <= 0) {
        clean = false;
        for (const auto& [t, c] : counts) w[t] += y * c;
        b += y;
      }
    }
    if (clean) return true;
  }
  return false;
}

std::string random_text(std::mt19937_64& rng, const std::vector<std::string>& words) {
  std::string out;
  const auto n = rng() % 8;
  for (std::size_t i = 0; i < n; ++i) out += words[rng() % words.size()] + " ";
  return out;
}

}  // namespace

TEST(Train, SeparableFixtureReachesPerfectAccuracy) {
  auto ds = separable();
  ASSERT_TRUE(perceptron_separable(ds));
  auto model = mt::train(ds, {});
  for (const auto& inst : ds.instances()) {
    EXPECT_EQ(model.predict(inst.text()).index, inst.gold_label) << inst.text();
  }
}

TEST(Train, LossNonIncreasing) {
  std::vector<double> history;
  mt::train(separable(), {}, &history);
  ASSERT_EQ(history.size(), 201u);
  for (std::size_t i = 1; i < history.size(); ++i) EXPECT_LE(history[i], history[i - 1] + 1e-12);
}

TEST(Train, ZeroEpochsIsUniform) {
  mt::TrainConfig c;
  c.epochs = 0;
  auto ds = separable();
  auto model = mt::train(ds, c);
  auto p = model.likelihood("you are ugly");
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_NEAR(mt::training_objective(model, ds, c.l2), std::log(2.0), 1e-12);
}

TEST(Train, DeterministicBitForBit) {
  auto a = mt::train(separable(), {});
  auto b = mt::train(separable(), {});
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.content_hash(), b.content_hash());
}

TEST(Train, SingleClassRejected) {
  auto ds = make_dataset({{"a", 1}, {"b", 1}});
  EXPECT_THROW(mt::train(ds, {}), mt::TrainingError);
}

TEST(Predict, HandComputedLogits) {
  auto model = make_binary_model({{"ugly", 3.0}, {"she", 0.1}, {"nice", -2.0}}, 0.5, 0.0);
  // offensive logit 3.1, non-offensive 0.5
  EXPECT_EQ(model.predict("she is ugly").label, "offensive");
  auto p = model.likelihood("she is ugly");
  const double e = std::exp(3.1 - 0.5);
  EXPECT_NEAR(p[1], e / (1 + e), 1e-12);
  // OOV / empty: argmax of biases
  EXPECT_EQ(model.predict("zzz qqq").index, 0u);
  EXPECT_EQ(model.predict("").index, 0u);
}

TEST(Predict, TiesGoToLowestIndex) {
  auto model = make_binary_model({{"x", 0.0}});
  EXPECT_EQ(model.predict("x").index, 0u);
}

TEST(Likelihood, ClosedForms) {
  auto zero = make_binary_model({{"x", 0.0}});
  auto p = zero.likelihood("x");
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  auto ln3 = make_binary_model({{"x", 0.0}}, std::log(3.0), 0.0);
  p = ln3.likelihood("x");
  EXPECT_NEAR(p[0], 0.75, 1e-12);
  EXPECT_NEAR(p[1], 0.25, 1e-12);
}

TEST(Likelihood, SumsToOneAndArgmaxAgrees) {
  auto model = mt::train(testsupport::olid(), {});
  std::mt19937_64 rng(3);
  std::vector<std::string> words = model.vocabulary();
  words.push_back("unseenword");
  for (int i = 0; i < 1000; ++i) {
    const auto text = random_text(rng, words);
    auto p = model.likelihood(text);
    double s = 0;
    for (double x : p) s += x;
    EXPECT_NEAR(s, 1.0, 1e-9);
    EXPECT_EQ(model.predict(text).index, mt::argmax(p));
  }
}

TEST(Logit, AdditiveUpToBias) {
  auto model = mt::train(testsupport::olid(), {});
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_text(rng, model.vocabulary());
    const auto b = random_text(rng, model.vocabulary());
    const auto xa = model.features(mt::tokenize(a));
    const auto xb = model.features(mt::tokenize(b));
    const auto xab = model.features(mt::tokenize(a + " " + b));
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
      EXPECT_NEAR(model.logit(xab, c), model.logit(xa, c) + model.logit(xb, c) - model.bias(c),
                  1e-9);
    }
  }
}

TEST(Gradient, EqualsWeightsAndFiniteDifferences) {
  auto model = mt::train(testsupport::olid(), {});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto x = model.features(mt::tokenize(random_text(rng, model.vocabulary())));
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
      const auto g = model.logit_gradient(x, c);
      ASSERT_EQ(g.size(), x.size());
      for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(g[k].first, x[k].first);
        EXPECT_EQ(g[k].second, model.weight(c, x[k].first));
        auto up = x, down = x;
        up[k].second += 1e-4;
        down[k].second -= 1e-4;
        const double fd = (model.logit(up, c) - model.logit(down, c)) / 2e-4;
        EXPECT_NEAR(fd, g[k].second, 1e-6);
      }
    }
  }
  EXPECT_TRUE(model.logit_gradient(model.features(mt::tokenize("qqq zzz")), 0).empty());
}

TEST(PredictDistribution, Cases) {
  auto model = make_binary_model({{"ugly", 2.0}});
  auto ds = make_dataset({{"ugly", 1}, {"so ugly", 1}, {"very ugly", 1}, {"nice", 0}});
  auto d = mt::predict_distribution(model, ds, mt::select_all(ds));
  EXPECT_DOUBLE_EQ(d[1].fraction, 0.75);
  EXPECT_DOUBLE_EQ(d[0].fraction, 0.25);
  auto constant = make_binary_model({{"x", 0.0}}, 0.0, 1.0);
  d = mt::predict_distribution(constant, ds, mt::select_all(ds));
  EXPECT_DOUBLE_EQ(d[1].fraction, 1.0);
  d = mt::predict_distribution(model, ds, mt::filter_id(mt::select_all(ds), 3));
  EXPECT_DOUBLE_EQ(d[0].fraction, 1.0);
  EXPECT_TRUE(mt::predict_distribution(model, ds, mt::Selection{}).empty());
}

TEST(Persistence, RoundTripAndHashCheck) {
  testsupport::TempDir dir;
  auto model = mt::train(separable(), {});
  const auto path = dir.path() / "m.json";
  model.save(path);
  auto loaded = mt::LinearTextModel::load(path);
  EXPECT_EQ(loaded.to_json(), model.to_json());
  EXPECT_EQ(loaded.content_hash(), model.content_hash());
  EXPECT_EQ(model.content_hash().size(), 64u);

  auto j = nlohmann::json::parse(std::ifstream(path));
  ASSERT_TRUE(j.contains("content_hash"));
  j["biases"][0] = 123.0;
  std::ofstream(path) << j.dump();
  EXPECT_THROW(mt::LinearTextModel::load(path), mt::LoadError);
}

TEST(ModelInvariants, WeightShapes) {
  EXPECT_THROW(mt::LinearTextModel({"a", "b"}, {"x", "y"}, {{1.0}, {1.0}}, {0, 0}),
               mt::ArgumentError);
  auto model = mt::train(testsupport::olid(), {});
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    EXPECT_EQ(model.weights(c).size(), model.vocabulary_size());
  }
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(mt::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
