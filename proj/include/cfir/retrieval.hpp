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

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfir/common.hpp"
#include "cfir/corpus.hpp"

namespace cfir {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Ordering of a ranked list: higher score first, ties by ascending doc_id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

struct RankedList {
  std::string query_id;
  std::string model_name;
  std::vector<ScoredDoc> entries;  // rank of entries[i] is i + 1

  std::optional<std::size_t> rank_of(std::string_view doc_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].doc_id == doc_id) return i + 1;
    }
    return std::nullopt;
  }

  std::vector<std::string> top_ids(std::size_t k) const {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) ids.push_back(entries[i].doc_id);
    return ids;
  }
};

/// Sorts scored documents into a ranked list truncated to `cutoff` entries.
inline RankedList rank_scores(std::string query_id, std::string model_name, std::vector<ScoredDoc> scored,
                              std::size_t cutoff) {
  if (cutoff < 1) throw ConfigError("rank cutoff must be >= 1");
  auto keep = std::min(cutoff, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    ranks_before);
  scored.resize(keep);
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].doc_id == scored[i - 1].doc_id) throw Error("duplicate doc_id in ranking: " + scored[i].doc_id);
  }
  return RankedList{std::move(query_id), std::move(model_name), std::move(scored)};
}

// ---------------------------------------------------------------------------
// BM25

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

inline double bm25_idf(std::size_t corpus_size, std::size_t df) {
  auto n = static_cast<double>(corpus_size);
  auto f = static_cast<double>(df);
  return std::log((n - f + 0.5) / (f + 0.5) + 1.0);
}

inline double bm25_term_weight(double idf, double tf, double doc_len, double avg_len, const Bm25Params& p) {
  double norm = avg_len > 0.0 ? doc_len / avg_len : 1.0;
  return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

/// BM25 of an arbitrary token bag against frozen corpus statistics. Each
/// query token contributes once per occurrence in the query.
inline double bm25_score(const InvertedIndex& index, std::span<const std::string> query_tokens,
                         const TermCounts& doc_terms, std::size_t doc_len, const Bm25Params& params = {}) {
  double score = 0.0;
  for (const auto& t : query_tokens) {
    auto it = doc_terms.find(t);
    if (it == doc_terms.end()) continue;
    double idf = bm25_idf(index.corpus_size(), index.doc_freq(t));
    score += bm25_term_weight(idf, it->second, static_cast<double>(doc_len), index.avg_doc_length(), params);
  }
  return score;
}

inline double bm25_score(const Corpus& corpus, const Query& query, std::string_view doc_id,
                         const Bm25Params& params = {}) {
  const auto& doc = corpus.at(doc_id);
  return bm25_score(corpus.index(), query.tokens, count_terms(doc.tokens), doc.length(), params);
}

// ---------------------------------------------------------------------------
// Static word embeddings

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void add(std::string token, std::vector<double> v) {
    if (v.size() != dim_) {
      throw Error("embedding for \"" + token + "\" has dimension " + std::to_string(v.size()) + ", expected " +
                  std::to_string(dim_));
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norms_[token] = std::sqrt(norm);
    vectors_[std::move(token)] = std::move(v);
  }

  const std::vector<double>* find(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view token) const { return find(token) != nullptr; }

  /// Cosine similarity; 0 if either token is unknown or has a zero vector.
  double cosine(std::string_view a, std::string_view b) const {
    auto ia = vectors_.find(std::string(a));
    auto ib = vectors_.find(std::string(b));
    if (ia == vectors_.end() || ib == vectors_.end()) return 0.0;
    double na = norms_.at(ia->first), nb = norms_.at(ib->first);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) dot += ia->second[i] * ib->second[i];
    return dot / (na * nb);
  }

  /// Mean of the known tokens' vectors; nullopt when none are known.
  std::optional<std::vector<double>> mean(std::span<const std::string> tokens) const {
    std::vector<double> acc(dim_, 0.0);
    std::size_t known = 0;
    for (const auto& t : tokens) {
      if (auto* v = find(t)) {
        for (std::size_t i = 0; i < dim_; ++i) acc[i] += (*v)[i];
        ++known;
      }
    }
    if (known == 0) return std::nullopt;
    for (auto& x : acc) x /= static_cast<double>(known);
    return acc;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::unordered_map<std::string, double> norms_;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Text format: optional `count dim` header, then `token v1 ... v_dim`.
inline EmbeddingTable read_embeddings(std::istream& in, const std::string& name = "<embeddings>") {
  std::string line;
  std::size_t lineno = 0;
  std::optional<EmbeddingTable> table;
  std::optional<std::size_t> declared_count;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(std::move(f));
    if (parts.empty()) continue;
    if (!table && parts.size() == 2) {
      std::size_t count = 0, dim = 0;
      auto [p1, e1] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), count);
      auto [p2, e2] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), dim);
      if (e1 == std::errc{} && e2 == std::errc{} && p1 == parts[0].data() + parts[0].size() &&
          p2 == parts[1].data() + parts[1].size()) {
        if (dim == 0) throw ParseError(name, lineno, "dimension must be positive");
        table.emplace(dim);
        declared_count = count;
        continue;
      }
    }
    if (parts.size() < 2) throw ParseError(name, lineno, "expected token followed by vector components");
    if (!table) table.emplace(parts.size() - 1);
    if (parts.size() - 1 != table->dim()) {
      throw ParseError(name, lineno,
                       "dimension mismatch: got " + std::to_string(parts.size() - 1) + ", expected " +
                           std::to_string(table->dim()));
    }
    std::vector<double> v(table->dim());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& s = parts[i + 1];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v[i]);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(name, lineno, "bad number \"" + s + "\"");
      }
    }
    table->add(parts[0], std::move(v));
  }
  if (!table) throw ParseError(name, lineno, "no embeddings found");
  if (declared_count && *declared_count != table->size()) {
    throw ParseError(name, lineno,
                     "header declares " + std::to_string(*declared_count) + " vectors, found " +
                         std::to_string(table->size()));
  }
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_embeddings(in, path.string());
}

/// Mean over query tokens of the best cosine against any document token.
/// Unknown query tokens contribute 0.
inline double embedding_score(const EmbeddingTable& table, const Query& query, const Document& doc) {
  if (query.tokens.empty()) return 0.0;
  std::vector<std::string_view> known;
  for (const auto& t : doc.tokens) {
    if (table.contains(t) && std::find(known.begin(), known.end(), t) == known.end()) known.push_back(t);
  }
  double total = 0.0;
  for (const auto& q : query.tokens) {
    if (!table.contains(q) || known.empty()) continue;
    double best = -1.0;
    for (auto t : known) best = std::max(best, table.cosine(q, t));
    total += best;
  }
  return total / static_cast<double>(query.tokens.size());
}

// ---------------------------------------------------------------------------
// Retrieval models

class RetrievalModel {
 public:
  virtual ~RetrievalModel() = default;

  virtual std::string name() const = 0;

  /// Scores any document, including edited ones, against the frozen corpus.
  virtual double score(const Query& query, const Document& doc) const = 0;

  /// Scores every corpus document, indexed by corpus position. Must agree
  /// exactly with score() on unedited documents.
  virtual std::vector<double> score_corpus(const Query& query) const {
    const auto& docs = corpus().documents();
    std::vector<double> scores(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) scores[i] = score(query, docs[i]);
    return scores;
  }

  virtual const Corpus& corpus() const = 0;
};

class Bm25Model final : public RetrievalModel {
 public:
  explicit Bm25Model(const Corpus& corpus, Bm25Params params = {}) : corpus_(corpus), params_(params) {}

  std::string name() const override { return "bm25"; }
  const Corpus& corpus() const override { return corpus_; }
  const Bm25Params& params() const { return params_; }

  double score(const Query& query, const Document& doc) const override {
    return bm25_score(corpus_.index(), query.tokens, count_terms(doc.tokens), doc.length(), params_);
  }

  // Same accumulation order as score(), so the two agree bit for bit.
  std::vector<double> score_corpus(const Query& query) const override {
    const auto& index = corpus_.index();
    std::vector<double> scores(corpus_.size(), 0.0);
    for (const auto& t : query.tokens) {
      double idf = bm25_idf(index.corpus_size(), index.doc_freq(t));
      for (const auto& p : index.postings(t)) {
        scores[p.doc] += bm25_term_weight(idf, p.tf, index.doc_length(p.doc), index.avg_doc_length(), params_);
      }
    }
    return scores;
  }

 private:
  const Corpus& corpus_;
  Bm25Params params_;
};

class EmbeddingModel final : public RetrievalModel {
 public:
  EmbeddingModel(const Corpus& corpus, const EmbeddingTable& table) : corpus_(corpus), table_(table) {}

  std::string name() const override { return "embed"; }
  const Corpus& corpus() const override { return corpus_; }

  double score(const Query& query, const Document& doc) const override {
    return embedding_score(table_, query, doc);
  }

 private:
  const Corpus& corpus_;
  const EmbeddingTable& table_;
};

/// Full-corpus ranking, truncated to `cutoff`.
inline RankedList rank(const RetrievalModel& model, const Query& query, std::size_t cutoff) {
  if (cutoff < 1) throw ConfigError("rank cutoff must be >= 1");
  auto scores = model.score_corpus(query);
  const auto& docs = model.corpus().documents();
  std::vector<ScoredDoc> scored;
  scored.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) scored.push_back({docs[i].doc_id, scores[i]});
  return rank_scores(query.query_id, model.name(), std::move(scored), cutoff);
}

/// Ranking restricted to the given candidate documents.
inline RankedList rank(const RetrievalModel& model, const Query& query, std::span<const std::string> candidates,
                       std::size_t cutoff) {
  if (cutoff < 1) throw ConfigError("rank cutoff must be >= 1");
  std::vector<ScoredDoc> scored;
  scored.reserve(candidates.size());
  for (const auto& id : candidates) scored.push_back({id, model.score(query, model.corpus().at(id))});
  return rank_scores(query.query_id, model.name(), std::move(scored), cutoff);
}

/// Rank a document would take if it replaced the corpus document with the
/// same id, every other document keeping its score in `corpus_scores`.
inline std::size_t rank_with_replacement(const Corpus& corpus, std::span<const double> corpus_scores,
                                         const ScoredDoc& replacement) {
  std::size_t ahead = 0;
  const auto& docs = corpus.documents();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].doc_id == replacement.doc_id) continue;
    if (ranks_before({docs[i].doc_id, corpus_scores[i]}, replacement)) ++ahead;
  }
  return ahead + 1;
}

/// 1-based position of `doc_id` in the full-corpus ranking.
inline std::size_t rank_of(const RetrievalModel& model, const Query& query, std::string_view doc_id) {
  const auto& corpus = model.corpus();
  auto pos = corpus.position(doc_id);
  auto scores = model.score_corpus(query);
  return rank_with_replacement(corpus, scores, {std::string(doc_id), scores[pos]});
}

/// Rank of an edited version of a corpus document under frozen statistics.
inline std::size_t rank_of(const RetrievalModel& model, const Query& query, const Document& edited,
                           std::span<const double> corpus_scores) {
  (void)model.corpus().position(edited.doc_id);
  return rank_with_replacement(model.corpus(), corpus_scores, {edited.doc_id, model.score(query, edited)});
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, ptr);
}

/// TREC run format: `query_id Q0 doc_id rank score tag`.
inline void write_trec_run(std::ostream& out, const RankedList& list, std::string_view tag) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    char score[32];
    std::snprintf(score, sizeof(score), "%.6f", list.entries[i].score);
    out << list.query_id << " Q0 " << list.entries[i].doc_id << ' ' << (i + 1) << ' ' << score << ' ' << tag
        << '\n';
  }
}

}  // namespace cfir
