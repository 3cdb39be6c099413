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

// Training data for the local top-K classifier of one (query, document) pair.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cfir/common.hpp"
#include "cfir/corpus.hpp"
#include "cfir/importance.hpp"
#include "cfir/retrieval.hpp"

namespace cfir {

/// Term frequencies over a vocabulary. Entries are non-negative integers
/// stored as reals.
struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline FeatureVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  FeatureVector v{std::vector<double>(vocab.size(), 0.0)};
  for (const auto& t : tokens) {
    if (auto pos = vocab.position(t)) v.values[*pos] += 1.0;
  }
  return v;
}

inline FeatureVector vectorize(const Document& doc, const Vocabulary& vocab) { return vectorize(doc.tokens, vocab); }

struct Instance {
  FeatureVector x;
  int label = 0;
  std::string doc_id;
};

struct SurrogateDataset {
  std::vector<Instance> instances;
  Vocabulary vocab;

  std::size_t dim() const { return vocab.size(); }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(instances.begin(), instances.end(), [&](const Instance& i) { return i.label == label; }));
  }

  /// Header = vocabulary words then "label"; one row per instance.
  void write_csv(std::ostream& out) const {
    out << "doc_id";
    for (const auto& w : vocab.words()) out << ',' << w;
    out << ",label\n";
    for (const auto& inst : instances) {
      out << inst.doc_id;
      for (double v : inst.x.values) out << ',' << static_cast<long long>(v);
      out << ',' << inst.label << '\n';
    }
  }
};

/// Sparse tf-idf vectors over the full token space, for nearest-neighbour
/// lookups.
class TfIdfSpace {
 public:
  explicit TfIdfSpace(const Corpus& corpus) : corpus_(corpus), norms_(corpus.size(), 0.0) {
    const auto& index = corpus.index();
    for (const auto& term : index.terms()) {
      double idf = std::log(static_cast<double>(index.corpus_size()) / index.doc_freq(term));
      for (const auto& p : index.postings(term)) {
        double w = p.tf * idf;
        norms_[p.doc] += w * w;
      }
    }
    for (auto& n : norms_) n = std::sqrt(n);
  }

  /// Cosine between `doc` (a corpus document) and every corpus document.
  std::vector<double> similarities(std::size_t doc) const {
    const auto& index = corpus_.index();
    std::vector<double> dots(corpus_.size(), 0.0);
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : corpus_.document(doc).tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      auto df = index.doc_freq(term);
      if (df == 0) continue;
      double idf = std::log(static_cast<double>(index.corpus_size()) / df);
      double wq = count * idf;
      if (wq == 0.0) continue;
      for (const auto& p : index.postings(term)) dots[p.doc] += wq * (p.tf * idf);
    }
    for (std::size_t i = 0; i < dots.size(); ++i) {
      double denom = norms_[doc] * norms_[i];
      dots[i] = denom > 0.0 ? dots[i] / denom : 0.0;
    }
    return dots;
  }

 private:
  const Corpus& corpus_;
  std::vector<double> norms_;
};

/// The `k` documents outside `top_ids` closest to `target` by tf-idf cosine.
/// The target itself is always included when it lies outside `top_ids`.
inline std::vector<std::string> select_negatives(const Corpus& corpus, const TfIdfSpace& space,
                                                 std::string_view target, std::span<const std::string> top_ids,
                                                 std::size_t k) {
  std::unordered_set<std::string_view> top(top_ids.begin(), top_ids.end());
  if (corpus.size() < top.size() + k) {
    throw Error("corpus too small: need " + std::to_string(k) + " documents outside the top " +
                std::to_string(top.size()) + ", have " + std::to_string(corpus.size() - top.size()));
  }
  auto target_pos = corpus.position(target);
  bool target_outside = !top.contains(target);
  auto sims = space.similarities(target_pos);

  std::vector<ScoredDoc> pool;
  pool.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& id = corpus.document(i).doc_id;
    if (top.contains(id) || i == target_pos) continue;
    pool.push_back({id, sims[i]});
  }
  std::vector<std::string> picked;
  if (target_outside) picked.emplace_back(target);
  auto want = k - picked.size();
  auto keep = std::min(want, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), ranks_before);
  for (std::size_t i = 0; i < keep; ++i) picked.push_back(pool[i].doc_id);
  return picked;
}

/// Top-K documents labelled 1, their nearest non-top-K neighbours of the
/// target labelled 0, all vectorized over `vocab`.
inline SurrogateDataset build_dataset(const Corpus& corpus, const TfIdfSpace& space, const RankedList& ranked,
                                      std::string_view target, std::size_t k, Vocabulary vocab) {
  if (k < 1) throw ConfigError("K must be >= 1");
  if (ranked.entries.size() < k) {
    throw Error("ranked list has " + std::to_string(ranked.entries.size()) + " entries, need K = " +
                std::to_string(k));
  }
  auto top_ids = ranked.top_ids(k);
  SurrogateDataset data;
  for (const auto& id : top_ids) data.instances.push_back({vectorize(corpus.at(id), vocab), 1, id});
  for (const auto& id : select_negatives(corpus, space, target, top_ids, k)) {
    data.instances.push_back({vectorize(corpus.at(id), vocab), 0, id});
  }
  data.vocab = std::move(vocab);
  return data;
}

}  // namespace cfir
