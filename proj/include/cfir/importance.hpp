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

// Per-document important words and the vocabulary built from them.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfir/common.hpp"
#include "cfir/corpus.hpp"
#include "cfir/retrieval.hpp"

namespace cfir {

enum class ImportanceKind {
  TfIdf,     // tf(t,d) * ln(N / df(t))
  EmbedSim,  // cosine(token, mean query vector)
  KeyBert,   // reserved slot, not implemented
};

inline std::string to_string(ImportanceKind k) {
  switch (k) {
    case ImportanceKind::TfIdf: return "tfidf";
    case ImportanceKind::EmbedSim: return "embed_sim";
    case ImportanceKind::KeyBert: return "keybert";
  }
  return "?";
}

inline ImportanceKind parse_importance_kind(std::string_view s) {
  if (s == "tfidf") return ImportanceKind::TfIdf;
  if (s == "embed_sim") return ImportanceKind::EmbedSim;
  if (s == "keybert") return ImportanceKind::KeyBert;
  throw ConfigError("unknown importance strategy \"" + std::string(s) + "\" (expected tfidf or embed_sim)");
}

struct ImportanceStrategy {
  ImportanceKind kind = ImportanceKind::TfIdf;
  std::size_t n = 10;  // words per document
};

struct WeightedWord {
  std::string word;
  double weight = 0.0;
};

/// Everything a strategy may need to look at.
struct ImportanceContext {
  const InvertedIndex& index;
  const EmbeddingTable* embeddings = nullptr;
};

namespace detail {

inline std::vector<WeightedWord> top_weighted(std::vector<WeightedWord> scored, std::size_t n) {
  auto by_weight = [](const WeightedWord& a, const WeightedWord& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.word < b.word;
  };
  auto keep = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), by_weight);
  scored.resize(keep);
  return scored;
}

}  // namespace detail

inline double tfidf_weight(std::uint32_t tf, std::size_t corpus_size, std::uint32_t df) {
  return static_cast<double>(tf) * std::log(static_cast<double>(corpus_size) / static_cast<double>(std::max<std::uint32_t>(df, 1)));
}

/// Top-n distinct tokens of `doc` with their strategy weights, best first.
inline std::vector<WeightedWord> important_words_weighted(const Document& doc, const Query& query,
                                                          const ImportanceStrategy& strategy,
                                                          const ImportanceContext& ctx) {
  if (strategy.n < 1) throw ConfigError("importance n must be >= 1");
  if (doc.tokens.empty()) throw Error("important_words: document " + doc.doc_id + " has no tokens");

  std::map<std::string, std::uint32_t> tf;
  for (const auto& t : doc.tokens) ++tf[t];

  std::vector<WeightedWord> scored;
  scored.reserve(tf.size());
  switch (strategy.kind) {
    case ImportanceKind::TfIdf:
      for (const auto& [t, count] : tf) {
        scored.push_back({t, tfidf_weight(count, ctx.index.corpus_size(), ctx.index.doc_freq(t))});
      }
      break;
    case ImportanceKind::EmbedSim: {
      if (ctx.embeddings == nullptr) throw ConfigError("embed_sim importance needs an embedding table");
      auto centre = ctx.embeddings->mean(query.tokens);
      for (const auto& [t, count] : tf) {
        double w = 0.0;
        if (centre) {
          if (const auto* v = ctx.embeddings->find(t)) w = cosine(*v, *centre);
        }
        scored.push_back({t, w});
      }
      break;
    }
    case ImportanceKind::KeyBert:
      throw ConfigError("keybert importance is not implemented");
  }
  return detail::top_weighted(std::move(scored), strategy.n);
}

inline std::vector<std::string> important_words(const Document& doc, const Query& query,
                                                const ImportanceStrategy& strategy, const ImportanceContext& ctx) {
  std::vector<std::string> words;
  for (auto& w : important_words_weighted(doc, query, strategy, ctx)) words.push_back(std::move(w.word));
  return words;
}

/// Feature space for the surrogate: distinct words, ordered by aggregate
/// importance (descending), ties by the word itself.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!position_.emplace(words_[i], i).second) throw Error("duplicate vocabulary word: " + words_[i]);
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t i) const { return words_.at(i); }

  std::optional<std::size_t> position(std::string_view w) const {
    auto it = position_.find(std::string(w));
    if (it == position_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> position_;
};

/// Union of the top-n words of each document.
inline Vocabulary build_vocabulary(std::span<const Document* const> top_docs, const Query& query,
                                   const ImportanceStrategy& strategy, const ImportanceContext& ctx) {
  if (top_docs.empty()) throw ConfigError("build_vocabulary needs at least one document");
  std::map<std::string, double> aggregate;
  for (const auto* doc : top_docs) {
    if (doc->tokens.empty()) continue;
    for (auto& w : important_words_weighted(*doc, query, strategy, ctx)) aggregate[w.word] += w.weight;
  }
  std::vector<WeightedWord> all;
  all.reserve(aggregate.size());
  for (auto& [w, s] : aggregate) all.push_back({w, s});
  std::stable_sort(all.begin(), all.end(), [](const WeightedWord& a, const WeightedWord& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.word < b.word;
  });
  std::vector<std::string> words;
  words.reserve(all.size());
  for (auto& w : all) words.push_back(std::move(w.word));
  return Vocabulary(std::move(words));
}

}  // namespace cfir
