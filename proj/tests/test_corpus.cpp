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

#include <sstream>

#include <gtest/gtest.h>

#include "cfir/corpus.hpp"
#include "test_support.hpp"

namespace cfir {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, DropsStopwordsAndPunctuation) {
  EXPECT_EQ(tokenize("What law repealed prohibition ?"), (Tokens{"law", "repealed", "prohibition"}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, CaseFoldingKeepsDuplicates) {
  EXPECT_EQ(tokenize("Prohibition prohibition"), (Tokens{"prohibition", "prohibition"}));
}

TEST(Tokenize, SplitsOnNonAlphanumeric) {
  EXPECT_EQ(tokenize("covid-19 vaccine's side_effects"), (Tokens{"covid", "19", "vaccine", "side", "effects"}));
}

TEST(Tokenize, DropsSingleCharacterTokens) { EXPECT_EQ(tokenize("x y zz 7 42"), (Tokens{"zz", "42"})); }

TEST(Tokenize, LowercasesNonAscii) {
  EXPECT_EQ(tokenize("ÉCOLE Straße ΑΘΗΝΑ Москва"), (Tokens{"école", "straße", "αθηνα", "москва"}));
}

TEST(Tokenize, Deterministic) {
  const std::string text = "The Role of Lipids, in membranes; lipid-rafts!";
  EXPECT_EQ(tokenize(text), tokenize(text));
}

TEST(Tokenize, MalformedUtf8DoesNotThrow) {
  std::string bad = "caf\xC3 ok\xFF\xFE word";
  EXPECT_NO_THROW(tokenize(bad));
  auto t = tokenize(bad);
  EXPECT_NE(std::find(t.begin(), t.end(), "word"), t.end());
}

TEST(BuildIndex, DocumentFrequency) {
  auto c = testing::corpus_of({{"d1", "lipid membrane"}, {"d2", "lipid lipid raft"}, {"d3", "protein fold"}});
  EXPECT_EQ(c.index().doc_freq("lipid"), 2u);
  EXPECT_EQ(c.index().doc_freq("absent"), 0u);
  EXPECT_EQ(c.index().corpus_size(), 3u);
}

TEST(BuildIndex, AverageLength) {
  auto c = testing::corpus_of({{"a", "w1 w2 w3 w4"}, {"b", "w1 w2 w3 w4 w5 w6"}, {"c", "w1 w2 w3 w4 w5 w6 w7 w8"}});
  EXPECT_DOUBLE_EQ(c.index().avg_doc_length(), 6.0);
}

TEST(BuildIndex, DuplicateIdRejectedByName) {
  try {
    testing::corpus_of({{"d1", "alpha"}, {"d1", "beta"}});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("d1"), std::string::npos);
  }
}

TEST(BuildIndex, EmptyCollection) {
  auto c = Corpus::build({});
  EXPECT_EQ(c.size(), 0u);
  EXPECT_EQ(c.index().avg_doc_length(), 0.0);
}

TEST(BuildIndex, InvariantsOnRandomCorpus) {
  auto c = testing::random_corpus(60, 7);
  const auto& idx = c.index();
  double total = 0;
  for (std::size_t d = 0; d < c.size(); ++d) {
    EXPECT_EQ(idx.doc_length(d), c.document(d).length());
    total += idx.doc_length(d);
  }
  EXPECT_DOUBLE_EQ(idx.avg_doc_length(), total / static_cast<double>(c.size()));
  for (const auto& t : idx.terms()) {
    auto plist = idx.postings(t);
    EXPECT_EQ(idx.doc_freq(t), plist.size());
    for (const auto& p : plist) {
      EXPECT_GE(p.tf, 1u);
      EXPECT_LE(p.tf, idx.doc_length(p.doc));
      auto& toks = c.document(p.doc).tokens;
      EXPECT_EQ(static_cast<std::uint32_t>(std::count(toks.begin(), toks.end(), t)), p.tf);
    }
  }
}

TEST(IndexFile, RebuildIsByteIdentical) {
  testing::TempDir dir("idx");
  auto path = dir / "corpus.jsonl";
  testing::write_text(path, R"({"id":"d2","text":"gamma delta delta"}
{"id":"d1","text":"alpha beta gamma"}
{"id":"d3","text":"épsilon zeta alpha alpha"}
)");
  Corpus::build(load_corpus(path)).save(dir / "a.cfir");
  Corpus::build(load_corpus(path)).save(dir / "b.cfir");
  auto a = testing::read_text(dir / "a.cfir");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, testing::read_text(dir / "b.cfir"));
}

TEST(IndexFile, RoundTrip) {
  testing::TempDir dir("idx");
  auto original = testing::random_corpus(40, 11);
  original.save(dir / "i.cfir");
  EXPECT_TRUE(Corpus::is_index_file(dir / "i.cfir"));
  auto loaded = Corpus::load(dir / "i.cfir");
  ASSERT_EQ(loaded.size(), original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(loaded.document(i).doc_id, original.document(i).doc_id);
    EXPECT_EQ(loaded.document(i).tokens, original.document(i).tokens);
  }
  EXPECT_EQ(loaded.index().terms(), original.index().terms());
  EXPECT_DOUBLE_EQ(loaded.index().avg_doc_length(), original.index().avg_doc_length());
  // Re-serializing the loaded corpus reproduces the file.
  loaded.save(dir / "j.cfir");
  EXPECT_EQ(testing::read_text(dir / "i.cfir"), testing::read_text(dir / "j.cfir"));
}

TEST(IndexFile, RejectsWrongVersionAndGarbage) {
  testing::TempDir dir("idx");
  testing::random_corpus(3, 1).save(dir / "i.cfir");
  auto bytes = testing::read_text(dir / "i.cfir");
  bytes[Corpus::kMagic.size()] = 9;  // version field, little-endian low byte
  testing::write_text(dir / "v.cfir", bytes);
  EXPECT_THROW(Corpus::load(dir / "v.cfir"), Error);
  testing::write_text(dir / "g.cfir", "not an index");
  EXPECT_FALSE(Corpus::is_index_file(dir / "g.cfir"));
  EXPECT_THROW(Corpus::load(dir / "g.cfir"), Error);
  testing::write_text(dir / "t.cfir", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(Corpus::load(dir / "t.cfir"), Error);
}

TEST(OpenCorpus, AcceptsJsonlOrIndex) {
  testing::TempDir dir("open");
  testing::write_text(dir / "c.jsonl", "{\"id\":\"d1\",\"text\":\"alpha beta\"}\n");
  auto a = open_corpus(dir / "c.jsonl");
  a.save(dir / "c.cfir");
  auto b = open_corpus(dir / "c.cfir");
  EXPECT_EQ(a.at("d1").tokens, b.at("d1").tokens);
}

TEST(LoadCorpus, OneDocumentPerLine) {
  std::istringstream in("{\"id\":\"d1\",\"text\":\"a b\"}\n{\"id\":\"d2\",\"text\":\"Lipid rafts\"}\n");
  auto docs = read_corpus_jsonl(in);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].doc_id, "d1");
  EXPECT_EQ(docs[0].raw_text, "a b");
  // "a" is a stopword and "b" is shorter than two characters.
  EXPECT_TRUE(docs[0].tokens.empty());
  EXPECT_EQ(docs[0].length(), 0u);
  EXPECT_EQ(docs[1].tokens, (Tokens{"lipid", "rafts"}));
}

TEST(LoadCorpus, MissingTextReportsLine) {
  std::istringstream in("{\"id\":\"d1\",\"text\":\"fine\"}\n{\"id\":\"d2\"}\n");
  try {
    read_corpus_jsonl(in, "c.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("c.jsonl:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("text"), std::string::npos);
  }
}

TEST(LoadCorpus, MalformedLinesReportLine) {
  for (const auto& bad : {std::string("{\"id\":\"d2\",\"text\":"), std::string("[1,2]"),
                          std::string("{\"id\":7,\"text\":\"x\"}")}) {
    std::istringstream in("{\"id\":\"d1\",\"text\":\"ok\"}\n\n" + bad + "\n");
    try {
      read_corpus_jsonl(in);
      FAIL() << "accepted: " << bad;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 3u) << bad;
    }
  }
}

TEST(LoadCorpus, MissingFile) { EXPECT_THROW(load_corpus("/nonexistent/c.jsonl"), Error); }

TEST(LoadQueries, TsvLine) {
  std::istringstream in("q7\trole of lipid\n");
  auto qs = read_queries_tsv(in);
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].query_id, "q7");
  EXPECT_EQ(qs[0].tokens, (Tokens{"role", "lipid"}));
}

TEST(LoadQueries, ErrorsCarryLineNumbers) {
  for (const auto& [text, line] : std::vector<std::pair<std::string, std::size_t>>{
           {"q1\tfine query\nno tab here\n", 2}, {"q1\tok words\n\tmissing id\n", 2}, {"q1\tthe of and\n", 1},
           {"q1\tgood words\nq2\ta\tb\n", 2}}) {
    std::istringstream in(text);
    try {
      read_queries_tsv(in);
      FAIL() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << text;
    }
  }
}

TEST(LoadQueries, CrlfTolerated) {
  std::istringstream in("q1\tlipid rafts\r\n");
  EXPECT_EQ(read_queries_tsv(in)[0].tokens, (Tokens{"lipid", "rafts"}));
}

}  // namespace
}  // namespace cfir
