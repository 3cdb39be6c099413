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

// Baseline explainers and the metrics reported for every method.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfir/cf_engine.hpp"
#include "cfir/corpus.hpp"
#include "cfir/importance.hpp"
#include "cfir/retrieval.hpp"

namespace cfir {

/// Each query token missing from the document, once.
inline Explanation baseline_qw(const Query& query, const Document& doc) {
  std::unordered_set<std::string_view> present(doc.tokens.begin(), doc.tokens.end());
  Explanation e;
  for (const auto& t : query.tokens) {
    if (!present.contains(t)) e[t] = 1;
  }
  return e;
}

/// Top-k' words by summed tf-idf over the given (top-5) documents.
inline std::vector<std::string> relevance_set(std::span<const Document* const> top_docs, const InvertedIndex& index,
                                              std::size_t k_prime) {
  std::map<std::string, double> weight;
  for (const auto* d : top_docs) {
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : d->tokens) ++tf[t];
    for (const auto& [t, c] : tf) weight[std::string(t)] += tfidf_weight(c, index.corpus_size(), index.doc_freq(t));
  }
  std::vector<WeightedWord> all;
  for (auto& [w, s] : weight) all.push_back({w, s});
  std::stable_sort(all.begin(), all.end(), [](const WeightedWord& a, const WeightedWord& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.word < b.word;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k_prime, all.size()); ++i) out.push_back(all[i].word);
  return out;
}

/// Relevance-set words missing from the document, once each.
inline Explanation baseline_topk(std::span<const std::string> relevance, const Document& doc) {
  std::unordered_set<std::string_view> present(doc.tokens.begin(), doc.tokens.end());
  Explanation e;
  for (const auto& w : relevance) {
    if (!present.contains(w)) e[w] = 1;
  }
  return e;
}

/// Cosine between the mean vector of the document tokens and the mean vector
/// of the explanation words. nullopt when either side has no known word.
inline std::optional<double> explanation_similarity(const Document& doc, const Explanation& e,
                                                    const EmbeddingTable& table) {
  std::vector<std::string> words;
  for (const auto& [w, _] : e) words.push_back(w);
  auto de = table.mean(doc.tokens);
  auto ee = table.mean(words);
  if (!de || !ee) return std::nullopt;
  return cosine(*de, *ee);
}

/// Percentage of query-word types among the explanation's word types.
inline std::optional<double> query_overlap(const Explanation& e, const Query& query) {
  if (e.empty()) return std::nullopt;
  std::unordered_set<std::string_view> q(query.tokens.begin(), query.tokens.end());
  std::size_t hit = 0;
  for (const auto& [w, _] : e) hit += q.contains(w);
  return 100.0 * static_cast<double>(hit) / static_cast<double>(e.size());
}

/// Outcome of one explainer on one (query, document) pair.
struct MethodOutcome {
  std::string method;
  Explanation explanation;
  std::size_t old_rank = 0;
  std::size_t new_rank = 0;
  bool improved = false;  // new_rank < old_rank
  bool failed = false;    // pipeline error; counts as not improved
  std::string error;
  std::optional<double> overlap;     // % of explanation types that are query words
  std::optional<double> similarity;  // explanation vs document embedding cosine
};

struct MethodAggregate {
  std::string method;
  std::size_t pairs = 0;
  std::size_t improved = 0;
  std::size_t failed = 0;
  double fidelity = 0.0;                      // 100 * improved / pairs
  double avg_new_words = 0.0;                 // distinct added types per pair
  std::optional<double> avg_query_overlap;    // over pairs with non-empty explanations
  std::optional<double> avg_rank_shift;       // over improved pairs
  std::optional<double> avg_similarity;       // over pairs where defined
};

/// Fidelity as a percentage: 100 x / n.
inline double fidelity(std::size_t improved, std::size_t n) {
  if (n == 0) throw Error("fidelity of an empty pair set");
  return 100.0 * static_cast<double>(improved) / static_cast<double>(n);
}

inline double avg_new_words(std::span<const MethodOutcome> outcomes) {
  if (outcomes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& o : outcomes) total += static_cast<double>(o.explanation.size());
  return total / static_cast<double>(outcomes.size());
}

inline std::optional<double> avg_query_overlap(std::span<const MethodOutcome> outcomes) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.overlap) {
      total += *o.overlap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

/// Mean of old_rank - new_rank over improved pairs.
inline std::optional<double> rank_shift(std::span<const MethodOutcome> outcomes) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.improved) {
      total += static_cast<double>(o.old_rank) - static_cast<double>(o.new_rank);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

inline std::optional<double> avg_similarity(std::span<const MethodOutcome> outcomes) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.similarity) {
      total += *o.similarity;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

inline MethodAggregate aggregate(std::string method, std::span<const MethodOutcome> outcomes) {
  MethodAggregate a;
  a.method = std::move(method);
  a.pairs = outcomes.size();
  for (const auto& o : outcomes) {
    a.improved += o.improved;
    a.failed += o.failed;
  }
  a.fidelity = a.pairs == 0 ? 0.0 : fidelity(a.improved, a.pairs);
  a.avg_new_words = avg_new_words(outcomes);
  a.avg_query_overlap = avg_query_overlap(outcomes);
  a.avg_rank_shift = rank_shift(outcomes);
  a.avg_similarity = avg_similarity(outcomes);
  return a;
}

}  // namespace cfir
