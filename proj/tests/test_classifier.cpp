/*
 * Copyright 2026 The CFIR Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cfir/classifier.hpp"

namespace cfir {
namespace {

SurrogateDataset dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  SurrogateDataset d;
  std::vector<std::string> words;
  for (std::size_t j = 0; j < rows.at(0).size(); ++j) words.push_back("f" + std::to_string(j));
  d.vocab = Vocabulary(words);
  for (std::size_t i = 0; i < rows.size(); ++i) d.instances.push_back({{rows[i]}, labels[i], "d" + std::to_string(i)});
  return d;
}

// Count data where positives lean on the first half of the features.
SurrogateDataset random_dataset(std::uint64_t seed, std::size_t n = 20, std::size_t dim = 12) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> hi(3.0), lo(0.7);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    int y = i < n / 2 ? 1 : 0;
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = ((j < dim / 2) == (y == 1)) ? hi(rng) : lo(rng);
    rows.push_back(x);
    labels.push_back(y);
  }
  return dataset(rows, labels);
}

TEST(Logistic, SeparableToyReachesFullAccuracy) {
  auto d = dataset({{2, 0}, {3, 1}, {0, 2}, {1, 3}}, {1, 1, 0, 0});
  auto m = train_logistic(d, 0.001, 500);
  EXPECT_EQ(accuracy(m, d), 1.0);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_LT(m.weights[1], 0.0);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto d = random_dataset(100 + s);
    std::vector<double> w(d.dim());
    for (auto& v : w) v = normal(rng);
    auto g = logistic_gradient(w, d);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double h = 1e-5;
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      double fd = (logistic_loss(wp, d) - logistic_loss(wm, d)) / (2 * h);
      double rel = std::abs(fd - g[j]) / std::max(1e-8, std::abs(fd) + std::abs(g[j]));
      EXPECT_LT(rel, 1e-5) << "seed " << s << " coord " << j;
    }
  }
}

TEST(Logistic, LossFormulaByHand) {
  auto d = dataset({{1, 0}, {0, 2}}, {1, 0});
  std::vector<double> w{0.5, -0.25};
  // -ln s(0.5) - ln(1 - s(-0.5)), averaged.
  double expect = (-std::log(1 / (1 + std::exp(-0.5))) - std::log(1 - 1 / (1 + std::exp(0.5)))) / 2;
  EXPECT_NEAR(logistic_loss(w, d), expect, 1e-14);
}

TEST(Logistic, ZeroFeaturesLeaveWeightsAtZero) {
  auto d = dataset({{0, 0}, {0, 0}, {0, 0}}, {1, 0, 1});
  auto m = train_logistic(d);
  for (double v : m.weights) EXPECT_EQ(v, 0.0);
}

TEST(Logistic, LossNonIncreasing) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto m = train_logistic(random_dataset(s));
    ASSERT_EQ(m.trace.size(), 1001u);
    EXPECT_NEAR(m.trace.front(), std::log(2.0), 1e-12);
    for (std::size_t e = 1; e < m.trace.size(); ++e) EXPECT_LE(m.trace[e], m.trace[e - 1] + 1e-15);
  }
}

TEST(Logistic, PredictionSurface) {
  LogisticModel m{{0.4, -1.2, 0.7}, true, {}};
  std::vector<double> x{2, 1, 1};
  double z = 0.8 - 1.2 + 0.7;
  EXPECT_NEAR(logit(m, x), z, 1e-15);
  EXPECT_NEAR(prob(m, x), 1 / (1 + std::exp(-z)), 1e-15);
  EXPECT_EQ(predict(m, x), 1);
  // A zero logit is classified as relevant.
  EXPECT_EQ(predict(m, std::vector<double>{3, 1, 0}), 1);
  EXPECT_EQ(predict(m, std::vector<double>{0, 1, 0}), 0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> c(0, 5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v{double(c(rng)), double(c(rng)), double(c(rng))};
    EXPECT_EQ(predict(m, v), logit(m, v) >= 0.0 ? 1 : 0);
  }
}

TEST(Logistic, SigmoidStableAtExtremes) {
  EXPECT_EQ(sigmoid(800), 1.0);
  EXPECT_EQ(sigmoid(-800), 0.0);
  EXPECT_NEAR(softplus(800), 800.0, 1e-12);
  EXPECT_NEAR(softplus(0), std::log(2.0), 1e-15);
}

TEST(Classifier, RejectsBadInput) {
  LogisticModel untrained;
  untrained.weights = {1.0};
  EXPECT_THROW(predict(untrained, std::vector<double>{1.0}), Error);
  auto m = train_logistic(dataset({{1, 0}, {0, 1}}, {1, 0}), 0.001, 5);
  EXPECT_THROW(predict(m, std::vector<double>{1.0}), Error);
  EXPECT_THROW(train_logistic(dataset({{1, 0}, {0, 1}}, {1, 1})), Error);
  ForestModel rf;
  EXPECT_THROW(prob(rf, std::vector<double>{}), Error);
}

TEST(Forest, PureLeafGivesCertainty) {
  auto d = dataset({{3, 0}, {4, 0}, {0, 3}, {0, 4}}, {1, 1, 0, 0});
  ForestParams p;
  p.n_estimators = 100;
  p.bootstrap = false;
  p.max_features = 2;
  auto m = train_forest(d, p);
  std::vector<double> x{5, 0};
  EXPECT_EQ(prob(m, x), 1.0);
  EXPECT_EQ(logit(m, x), kForestLogitClamp);
  EXPECT_EQ(logit(m, std::vector<double>{0, 5}), -kForestLogitClamp);
}

TEST(Forest, LogitIsClampedLogOdds) {
  // Hand-built forest of four stumps: three vote 1 for x0 > 0.5.
  ForestModel m;
  m.dim = 1;
  m.trained = true;
  for (int t = 0; t < 4; ++t) {
    DecisionTree tree;
    tree.nodes = {{0, 0.5, 1, 2, 0}, {-1, 0, -1, -1, 0}, {-1, 0, -1, -1, t < 3 ? 1 : 0}};
    m.trees.push_back(tree);
  }
  std::vector<double> x{1};
  EXPECT_EQ(prob(m, x), 0.75);
  EXPECT_NEAR(logit(m, x), std::log(3.0), 1e-15);
  EXPECT_EQ(predict(m, x), 1);
  EXPECT_EQ(predict(m, std::vector<double>{0}), 0);
}

TEST(Forest, AtLeastAsAccurateAsStump) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto d = random_dataset(40 + s, 40, 16);
    ForestParams stump;
    stump.n_estimators = 1;
    stump.max_depth = 1;
    stump.bootstrap = false;
    stump.max_features = d.dim();
    ForestParams full;
    full.seed = s;
    EXPECT_GE(accuracy(train_forest(d, full), d), accuracy(train_forest(d, stump), d));
  }
}

TEST(Forest, RespectsDepthLimit) {
  auto d = random_dataset(9, 60, 16);
  ForestParams p;
  p.max_depth = 3;
  for (const auto& t : train_forest(d, p).trees) EXPECT_LE(t.depth(), 3u);
}

TEST(Forest, DeterministicForSeed) {
  auto d = random_dataset(11);
  ForestParams p;
  p.seed = 77;
  auto a = train_forest(d, p), b = train_forest(d, p);
  std::ostringstream sa, sb;
  write_model(sa, a);
  write_model(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Forest, InvariantUnderMonotoneRemap) {
  auto d = random_dataset(13);
  auto remapped = d;
  for (auto& inst : remapped.instances) {
    for (auto& v : inst.x.values) v = 3 * v + v * v;
  }
  // Split midpoints move under the remap, so only in-sample points are
  // guaranteed to fall on the same side: train without bootstrap.
  ForestParams p;
  p.seed = 5;
  p.bootstrap = false;
  auto a = train_forest(d, p), b = train_forest(remapped, p);
  for (std::size_t i = 0; i < d.instances.size(); ++i) {
    EXPECT_EQ(prob(a, d.instances[i].x.values), prob(b, remapped.instances[i].x.values));
  }
}

TEST(Persistence, RoundTripBothKinds) {
  auto d = random_dataset(17);
  ForestParams p;
  p.n_estimators = 7;
  for (Classifier c : {Classifier(train_logistic(d)), Classifier(train_forest(d, p))}) {
    std::stringstream buf;
    write_model(buf, c);
    auto back = read_model(buf);
    EXPECT_EQ(back.index(), c.index());
    for (const auto& inst : d.instances) EXPECT_EQ(logit(back, inst.x.values), logit(c, inst.x.values));
  }
  std::stringstream junk("CFIRMDL\n\x07");
  EXPECT_THROW(read_model(junk), Error);
}

TEST(Persistence, JsonDumpNamesWords) {
  auto d = dataset({{2, 0}, {0, 2}}, {1, 0});
  auto j = model_to_json(Classifier(train_logistic(d, 0.1, 10)), d.vocab);
  EXPECT_EQ(j["type"], "logistic");
  EXPECT_GT(j["weights"]["f0"].get<double>(), 0.0);
}

}  // namespace
}  // namespace cfir
