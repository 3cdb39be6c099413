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

// Importance selection, vocabulary and surrogate dataset assembly.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cfir/importance.hpp"
#include "cfir/surrogate.hpp"
#include "test_support.hpp"

namespace cfir {
namespace {

using Words = std::vector<std::string>;

TEST(Importance, ShortDocumentReturnsAllTokens) {
  auto c = testing::corpus_of({{"d1", "alpha beta gamma alpha"}, {"d2", "delta"}});
  ImportanceContext ctx{c.index()};
  auto w = important_words(c.at("d1"), make_query("q", "alpha"), {ImportanceKind::TfIdf, 10}, ctx);
  EXPECT_EQ(std::set<std::string>(w.begin(), w.end()), (std::set<std::string>{"alpha", "beta", "gamma"}));
}

TEST(Importance, RareTokenOutranksCommonAtEqualTf) {
  // "unique" has df=1, "common" df=3: ln(3/1) > ln(3/3) = 0.
  auto c = testing::corpus_of({{"d1", "common unique"}, {"d2", "common other"}, {"d3", "common third"}});
  ImportanceContext ctx{c.index()};
  auto w = important_words_weighted(c.at("d1"), make_query("q", "x1"), {ImportanceKind::TfIdf, 2}, ctx);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].word, "unique");
  EXPECT_NEAR(w[0].weight, std::log(3.0), 1e-12);
  EXPECT_EQ(w[1].word, "common");
  EXPECT_NEAR(w[1].weight, 0.0, 1e-12);
}

TEST(Importance, TfIdfWeightFormula) {
  EXPECT_NEAR(tfidf_weight(3, 100, 10), 3 * std::log(10.0), 1e-12);
  EXPECT_NEAR(tfidf_weight(2, 100, 0), 2 * std::log(100.0), 1e-12);  // unseen word guards df at 1
}

TEST(Importance, EmbedSimQueryTokenRanksFirst) {
  auto c = testing::corpus_of({{"d1", "law riot repeal prohibition"}});
  EmbeddingTable t(2);
  t.add("prohibition", {1, 0});
  t.add("law", {0.8, 0.6});
  t.add("riot", {0, 1});
  t.add("repeal", {-1, 0});
  ImportanceContext ctx{c.index(), &t};
  auto w = important_words(c.at("d1"), make_query("q", "prohibition"), {ImportanceKind::EmbedSim, 4}, ctx);
  EXPECT_EQ(w, (Words{"prohibition", "law", "riot", "repeal"}));
}

TEST(Importance, EmbedSimWithoutTableIsConfigError) {
  auto c = testing::corpus_of({{"d1", "alpha beta"}});
  ImportanceContext ctx{c.index()};
  EXPECT_THROW(important_words(c.at("d1"), make_query("q", "alpha"), {ImportanceKind::EmbedSim, 4}, ctx),
               ConfigError);
}

TEST(Importance, KeyBertSlotAndBadArguments) {
  auto c = testing::corpus_of({{"d1", "alpha beta"}, {"d2", "the of"}});
  ImportanceContext ctx{c.index()};
  auto q = make_query("q", "alpha");
  EXPECT_THROW(important_words(c.at("d1"), q, {ImportanceKind::KeyBert, 4}, ctx), ConfigError);
  EXPECT_THROW(important_words(c.at("d1"), q, {ImportanceKind::TfIdf, 0}, ctx), ConfigError);
  EXPECT_THROW(important_words(c.at("d2"), q, {ImportanceKind::TfIdf, 4}, ctx), Error);
  EXPECT_EQ(parse_importance_kind("tfidf"), ImportanceKind::TfIdf);
  EXPECT_EQ(parse_importance_kind("embed_sim"), ImportanceKind::EmbedSim);
  EXPECT_THROW(parse_importance_kind("bert"), ConfigError);
}

TEST(Importance, OutputIsSubsetOfDocument) {
  auto c = testing::random_corpus(40, 8);
  ImportanceContext ctx{c.index()};
  for (const auto& d : c.documents()) {
    auto w = important_words(d, make_query("q", "w1"), {ImportanceKind::TfIdf, 5}, ctx);
    EXPECT_LE(w.size(), 5u);
    EXPECT_EQ(std::set<std::string>(w.begin(), w.end()).size(), w.size());
    for (const auto& x : w) EXPECT_NE(std::find(d.tokens.begin(), d.tokens.end(), x), d.tokens.end());
  }
}

TEST(Vocabulary, UnionOfTopSets) {
  // n=2 on each doc: {aa,bb} from d1 and {bb,cc} from d2.
  auto c = testing::corpus_of({{"d1", "aa aa bb"}, {"d2", "bb cc cc"}, {"d3", "zz"}, {"d4", "yy"}});
  ImportanceContext ctx{c.index()};
  std::vector<const Document*> top{&c.at("d1"), &c.at("d2")};
  auto v = build_vocabulary(top, make_query("q", "aa"), {ImportanceKind::TfIdf, 2}, ctx);
  EXPECT_EQ(std::set<std::string>(v.words().begin(), v.words().end()), (std::set<std::string>{"aa", "bb", "cc"}));
  EXPECT_EQ(v.size(), 3u);
  // Aggregate weights: aa = cc = 2 ln 4, bb = 2 ln 2; ties in lexicographic order.
  EXPECT_EQ(v.words(), (Words{"aa", "cc", "bb"}));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.position(v.word(i)), i);
  EXPECT_FALSE(v.position("zz").has_value());
}

TEST(Vocabulary, SizeBoundAndCoverage) {
  auto c = testing::random_corpus(60, 13, 80);
  ImportanceContext ctx{c.index()};
  std::vector<const Document*> top;
  for (std::size_t i = 0; i < 10; ++i) top.push_back(&c.document(i));
  auto q = make_query("q", "w1");
  ImportanceStrategy s{ImportanceKind::TfIdf, 10};
  auto v = build_vocabulary(top, q, s, ctx);
  EXPECT_LE(v.size(), 100u);
  for (const auto* d : top) {
    for (const auto& w : important_words(*d, q, s, ctx)) EXPECT_TRUE(v.position(w).has_value()) << w;
  }
  EXPECT_THROW(Vocabulary(Words{"a", "a"}), Error);
  EXPECT_THROW(build_vocabulary({}, q, s, ctx), ConfigError);
}

TEST(Vectorize, CountsVocabularyWords) {
  Vocabulary v(Words{"law", "prohibition", "repeal"});
  auto d = make_document("d", "prohibition prohibition act");
  EXPECT_EQ(vectorize(d, v).values, (std::vector<double>{0, 2, 0}));
  EXPECT_EQ(vectorize(make_document("e", ""), v).values, (std::vector<double>{0, 0, 0}));
}

TEST(Vectorize, RepeatedWordCount) {
  Vocabulary v(Words{"prohibition", "repealed", "amendment"});
  auto d = make_document("3686955", "Repealed, repealed and repealed: the amendment");
  EXPECT_EQ(vectorize(d, v)[1], 3.0);
}

TEST(Vectorize, LinearUnderConcatenation) {
  Vocabulary v(Words{"w1", "w2", "w3", "w5", "w8", "w13"});
  auto c = testing::random_corpus(30, 17, 15);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const auto& a = c.document(i);
    const auto& b = c.document(i + 1);
    std::vector<std::string> joined = a.tokens;
    joined.insert(joined.end(), b.tokens.begin(), b.tokens.end());
    auto va = vectorize(a, v), vb = vectorize(b, v), vj = vectorize(joined, v);
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(vj[j], va[j] + vb[j]);
  }
}

// Corpus of 6 docs; with top-K = {t1,t2} and K = 2.
Corpus negatives_corpus() {
  return testing::corpus_of({{"t1", "alpha beta"},
                             {"t2", "alpha gamma"},
                             {"target", "lipid raft membrane"},
                             {"twin", "lipid raft membrane"},
                             {"near", "lipid raft protein"},
                             {"far", "engine piston"}});
}

TEST(Negatives, TargetAlwaysIncluded) {
  auto c = negatives_corpus();
  TfIdfSpace space(c);
  Words top{"t1", "t2"};
  auto neg = select_negatives(c, space, "target", top, 2);
  ASSERT_EQ(neg.size(), 2u);
  EXPECT_EQ(neg[0], "target");
}

TEST(Negatives, PlantedDuplicateSelected) {
  auto c = negatives_corpus();
  TfIdfSpace space(c);
  Words top{"t1", "t2"};
  auto neg = select_negatives(c, space, "target", top, 2);
  EXPECT_EQ(neg[1], "twin");
  auto sims = space.similarities(c.position("target"));
  EXPECT_NEAR(sims[c.position("twin")], 1.0, 1e-12);
  auto neg3 = select_negatives(c, space, "target", top, 3);
  EXPECT_EQ(neg3, (Words{"target", "twin", "near"}));
}

TEST(Negatives, ForcedChoiceAndTooSmall) {
  auto c = testing::corpus_of({{"t1", "alpha"}, {"t2", "beta"}, {"n1", "gamma"}, {"n2", "delta"}});
  TfIdfSpace space(c);
  Words top{"t1", "t2"};
  auto neg = select_negatives(c, space, "n1", top, 2);
  EXPECT_EQ(std::set<std::string>(neg.begin(), neg.end()), (std::set<std::string>{"n1", "n2"}));
  EXPECT_THROW(select_negatives(c, space, "n1", top, 3), Error);
}

TEST(Negatives, BruteForceCosineOracle) {
  auto c = testing::random_corpus(40, 23, 25);
  TfIdfSpace space(c);
  // Independent dense tf-idf cosine.
  auto vec = [&](const Document& d) {
    std::map<std::string, double> v;
    for (const auto& t : d.tokens) v[t] += 1.0;
    for (auto& [t, x] : v) {
      double df = 0;
      for (const auto& e : c.documents()) df += std::count(e.tokens.begin(), e.tokens.end(), t) > 0;
      x *= std::log(static_cast<double>(c.size()) / df);
    }
    return v;
  };
  auto cos = [&](const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (auto& [t, x] : a) {
      na += x * x;
      if (auto it = b.find(t); it != b.end()) dot += x * it->second;
    }
    for (auto& [t, x] : b) nb += x * x;
    return na == 0 || nb == 0 ? 0.0 : dot / std::sqrt(na * nb);
  };
  auto target = vec(c.document(5));
  auto sims = space.similarities(5);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(sims[i], cos(target, vec(c.document(i))), 1e-12);
}

TEST(Dataset, BalancedAndLabelled) {
  auto c = testing::random_corpus(60, 29, 20);
  Bm25Model m(c);
  auto q = make_query("q", "w1 w2 w3");
  auto ranking = rank(m, q, c.size());
  std::vector<const Document*> top;
  for (const auto& id : ranking.top_ids(10)) top.push_back(&c.at(id));
  ImportanceContext ctx{c.index()};
  auto vocab = build_vocabulary(top, q, {ImportanceKind::TfIdf, 10}, ctx);
  TfIdfSpace space(c);
  const auto& target = ranking.entries[20].doc_id;
  auto data = build_dataset(c, space, ranking, target, 10, vocab);
  EXPECT_EQ(data.instances.size(), 20u);
  EXPECT_EQ(data.count(1), 10u);
  EXPECT_EQ(data.count(0), 10u);
  EXPECT_EQ(data.dim(), vocab.size());
  auto top_ids = ranking.top_ids(10);
  bool target_seen = false;
  for (const auto& inst : data.instances) {
    bool in_top = std::find(top_ids.begin(), top_ids.end(), inst.doc_id) != top_ids.end();
    EXPECT_EQ(inst.label == 1, in_top);
    EXPECT_EQ(inst.x, vectorize(c.at(inst.doc_id), vocab));
    if (inst.doc_id == target) {
      target_seen = true;
      EXPECT_EQ(inst.label, 0);
    }
  }
  EXPECT_TRUE(target_seen);
  EXPECT_THROW(build_dataset(c, space, rank(m, q, 5), target, 10, vocab), Error);
}

TEST(Dataset, CsvDump) {
  auto c = testing::corpus_of({{"t1", "alpha alpha"}, {"n1", "beta"}, {"n2", "gamma"}});
  auto ranking = rank_scores("q", "m", {{"t1", 2.0}, {"n1", 1.0}, {"n2", 0.0}}, 3);
  TfIdfSpace space(c);
  auto data = build_dataset(c, space, ranking, "n1", 1, Vocabulary(Words{"alpha", "beta"}));
  std::ostringstream out;
  data.write_csv(out);
  EXPECT_EQ(out.str(), "doc_id,alpha,beta,label\nt1,2,0,1\nn1,0,1,0\n");
}

}  // namespace
}  // namespace cfir
