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

// End-to-end explanation of (query, document) pairs and batch evaluation.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cfir/cf_engine.hpp"
#include "cfir/classifier.hpp"
#include "cfir/corpus.hpp"
#include "cfir/evaluation.hpp"
#include "cfir/importance.hpp"
#include "cfir/retrieval.hpp"
#include "cfir/surrogate.hpp"

namespace cfir {

inline constexpr std::uint32_t kReportFormatVersion = 1;

enum class ClassifierKind { Logistic, Forest };

inline std::string to_string(ClassifierKind k) { return k == ClassifierKind::Logistic ? "lr" : "rf"; }

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "lr") return ClassifierKind::Logistic;
  if (s == "rf") return ClassifierKind::Forest;
  throw ConfigError("unknown classifier \"" + std::string(s) + "\" (expected lr or rf)");
}

struct PipelineConfig {
  std::size_t top_k = 10;  // K
  ImportanceStrategy strategy;
  ClassifierKind classifier = ClassifierKind::Logistic;
  double learning_rate = 0.001;
  std::size_t epochs = 1000;
  std::size_t n_estimators = 100;
  CfConfig cf;                   // cf.seed is the run seed
  std::size_t k_prime = 10;      // Top-K' relevance set size
  std::size_t k_prime_docs = 5;  // documents feeding the relevance set
  std::size_t eval_floor = 10;   // test documents rank below this
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"top_k", c.top_k},
          {"nwords", c.strategy.n},
          {"strategy", to_string(c.strategy.kind)},
          {"classifier", to_string(c.classifier)},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"n_estimators", c.n_estimators},
          {"cf_k", c.cf.k},
          {"lambda1", c.cf.lambda1},
          {"lambda2", c.cf.lambda2},
          {"max_iter", c.cf.max_iter},
          {"step", c.cf.step},
          {"desired", c.cf.desired},
          {"seed", c.cf.seed},
          {"k_prime", c.k_prime},
          {"k_prime_docs", c.k_prime_docs},
          {"eval_floor", c.eval_floor}};
}

/// Scores of every corpus document for one query, and the full ranking.
struct QueryContext {
  Query query;
  std::vector<double> scores;
  RankedList ranking;

  static QueryContext make(const RetrievalModel& model, Query query) {
    QueryContext ctx;
    ctx.scores = model.score_corpus(query);
    const auto& docs = model.corpus().documents();
    if (ctx.scores.size() != docs.size()) throw Error("model returned the wrong number of scores");
    std::vector<ScoredDoc> scored;
    scored.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) scored.push_back({docs[i].doc_id, ctx.scores[i]});
    ctx.ranking = rank_scores(query.query_id, model.name(), std::move(scored), std::max<std::size_t>(1, docs.size()));
    ctx.query = std::move(query);
    return ctx;
  }

  std::size_t rank_of(std::string_view doc_id) const {
    auto r = ranking.rank_of(doc_id);
    if (!r) throw Error("unknown doc_id: " + std::string(doc_id));
    return *r;
  }
};

/// Shared read-only inputs for explaining pairs.
struct ExplainEnv {
  const RetrievalModel& model;
  const TfIdfSpace& space;
  const EmbeddingTable* embeddings = nullptr;
};

/// Details of the counterfactual run for one pair.
struct CfirDetails {
  std::vector<std::string> vocabulary;
  std::vector<double> d_vec;
  std::vector<double> caps;
  double classifier_accuracy = 0.0;
  int original_prediction = 0;
  CounterfactualResult cf;
  std::optional<Classifier> model;
  std::optional<SurrogateDataset> dataset;
};

struct PairResult {
  std::string query_id;
  std::string doc_id;
  std::size_t original_rank = 0;
  std::uint64_t seed = 0;
  std::string note;
  std::optional<CfirDetails> cfir;
  std::vector<MethodOutcome> outcomes;  // one per method, in request order

  const MethodOutcome* outcome(std::string_view method) const {
    for (const auto& o : outcomes) {
      if (o.method == method) return &o;
    }
    return nullptr;
  }
};

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m = {"cfir", "qw", "topk"};
  return m;
}

namespace detail {

inline void score_outcome(MethodOutcome& o, const ExplainEnv& env, const QueryContext& ctx, const Document& doc) {
  o.old_rank = ctx.rank_of(doc.doc_id);
  if (o.explanation.empty()) {
    o.new_rank = o.old_rank;
  } else {
    auto edited = apply_explanation(doc, o.explanation);
    o.new_rank = cfir::rank_of(env.model, ctx.query, edited, ctx.scores);
  }
  o.improved = o.new_rank < o.old_rank;
  o.overlap = query_overlap(o.explanation, ctx.query);
  if (env.embeddings != nullptr) o.similarity = explanation_similarity(doc, o.explanation, *env.embeddings);
}

inline std::vector<const Document*> top_documents(const Corpus& corpus, const RankedList& ranking, std::size_t k) {
  std::vector<const Document*> docs;
  for (const auto& id : ranking.top_ids(k)) docs.push_back(&corpus.at(id));
  return docs;
}

}  // namespace detail

/// Vocabulary -> surrogate dataset -> classifier -> counterfactual for one
/// document outside the top-K.
inline CfirDetails run_counterfactual(const ExplainEnv& env, const QueryContext& ctx, const Document& doc,
                                      const PipelineConfig& cfg, std::uint64_t seed, bool keep_artifacts = false) {
  const auto& corpus = env.model.corpus();
  auto top = detail::top_documents(corpus, ctx.ranking, cfg.top_k);
  ImportanceContext ictx{corpus.index(), env.embeddings};
  auto vocab = build_vocabulary(top, ctx.query, cfg.strategy, ictx);
  auto data = build_dataset(corpus, env.space, ctx.ranking, doc.doc_id, cfg.top_k, vocab);

  CfirDetails details;
  details.vocabulary = vocab.words();
  Classifier model = cfg.classifier == ClassifierKind::Logistic
                         ? Classifier(train_logistic(data, cfg.learning_rate, cfg.epochs))
                         : Classifier(train_forest(data, ForestParams{.n_estimators = cfg.n_estimators,
                                                                      .seed = derive_seed(seed, "forest")}));
  details.classifier_accuracy = std::visit([&](const auto& m) { return accuracy(m, data); }, model);
  details.d_vec = vectorize(doc, vocab).values;
  details.caps = coordinate_caps(data);
  details.original_prediction = predict(model, details.d_vec);

  CfConfig cf = cfg.cf;
  cf.seed = seed;
  details.cf = generate(model, details.d_vec, details.caps, vocab, cf);
  if (keep_artifacts) {
    details.model = std::move(model);
    details.dataset = std::move(data);
  }
  return details;
}

/// Runs the requested methods on one pair. Method failures are recorded in
/// the outcome, never thrown.
inline PairResult explain_pair(const ExplainEnv& env, const QueryContext& ctx, std::string_view doc_id,
                               const PipelineConfig& cfg, std::span<const std::string> methods,
                               bool keep_artifacts = false) {
  const auto& corpus = env.model.corpus();
  const auto& doc = corpus.at(doc_id);
  PairResult r;
  r.query_id = ctx.query.query_id;
  r.doc_id = doc.doc_id;
  r.original_rank = ctx.rank_of(doc_id);
  r.seed = derive_seed(cfg.cf.seed, r.query_id, r.doc_id);

  for (const auto& method : methods) {
    MethodOutcome o;
    o.method = method;
    try {
      if (method == "cfir") {
        if (r.original_rank <= cfg.top_k) {
          r.note = "already within top-K";
        } else {
          r.cfir = run_counterfactual(env, ctx, doc, cfg, r.seed, keep_artifacts);
          o.explanation = r.cfir->cf.explanation;
        }
      } else if (method == "qw") {
        o.explanation = baseline_qw(ctx.query, doc);
      } else if (method == "topk") {
        auto top = detail::top_documents(corpus, ctx.ranking, cfg.k_prime_docs);
        o.explanation = baseline_topk(relevance_set(top, corpus.index(), cfg.k_prime), doc);
      } else {
        throw ConfigError("unknown method " + method);
      }
      detail::score_outcome(o, env, ctx, doc);
    } catch (const std::exception& e) {
      o = MethodOutcome{};
      o.method = method;
      o.failed = true;
      o.error = e.what();
      o.old_rank = r.original_rank;
      o.new_rank = r.original_rank;
    }
    r.outcomes.push_back(std::move(o));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

struct TestPair {
  std::string query_id;
  std::string doc_id;
};

/// `query_id<TAB>doc_id` lines.
inline std::vector<TestPair> read_pairs_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<TestPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError(path.string(), lineno, "expected query_id<TAB>doc_id");
    }
    pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return pairs;
}

/// First `n_queries` queries, `per_query` documents each sampled without
/// replacement from ranks (floor, floor + window].
inline std::vector<TestPair> auto_select_pairs(std::span<const QueryContext> contexts, std::size_t n_queries,
                                               std::size_t per_query, std::size_t floor, std::size_t window,
                                               std::uint64_t seed) {
  std::vector<TestPair> pairs;
  for (std::size_t q = 0; q < std::min(n_queries, contexts.size()); ++q) {
    const auto& ctx = contexts[q];
    std::vector<std::string> pool;
    for (std::size_t r = floor; r < std::min(floor + window, ctx.ranking.entries.size()); ++r) {
      pool.push_back(ctx.ranking.entries[r].doc_id);
    }
    std::mt19937_64 rng(derive_seed(seed, ctx.query.query_id, "pairs"));
    for (std::size_t i = 0; i < std::min(per_query, pool.size()); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      pairs.push_back({ctx.query.query_id, pool[i]});
    }
  }
  return pairs;
}

struct EvalReport {
  nlohmann::json config;
  std::string model_name;
  std::vector<PairResult> pairs;
  std::vector<MethodAggregate> aggregates;

  std::vector<MethodOutcome> outcomes(std::string_view method) const {
    std::vector<MethodOutcome> out;
    for (const auto& p : pairs) {
      if (const auto* o = p.outcome(method)) out.push_back(*o);
    }
    return out;
  }
};

/// Runs `fn(i)` for i in [0, n) on `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

inline std::vector<QueryContext> make_contexts(const RetrievalModel& model, std::span<const Query> queries,
                                               std::size_t jobs = 1) {
  std::vector<QueryContext> contexts(queries.size());
  parallel_for(queries.size(), jobs, [&](std::size_t i) { contexts[i] = QueryContext::make(model, queries[i]); });
  return contexts;
}

/// Explains every pair with every method and aggregates per method.
inline EvalReport evaluate(const ExplainEnv& env, std::span<const QueryContext> contexts,
                           std::span<const TestPair> pairs, const PipelineConfig& cfg,
                           std::span<const std::string> methods, std::size_t jobs = 1,
                           const std::map<std::string, std::string>& skipped_queries = {}) {
  std::unordered_map<std::string, const QueryContext*> by_query;
  for (const auto& c : contexts) by_query[c.query.query_id] = &c;

  EvalReport report;
  report.config = to_json(cfg);
  report.model_name = env.model.name();
  report.pairs.resize(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const auto& p = pairs[i];
    auto it = by_query.find(p.query_id);
    if (it == by_query.end() || !env.model.corpus().find(p.doc_id)) {
      PairResult r;
      r.query_id = p.query_id;
      r.doc_id = p.doc_id;
      if (auto sk = skipped_queries.find(p.query_id); sk != skipped_queries.end()) {
        r.note = "query skipped: " + sk->second;
      } else {
        r.note = it == by_query.end() ? "unknown query_id" : "unknown doc_id";
      }
      for (const auto& m : methods) {
        MethodOutcome o;
        o.method = m;
        o.failed = true;
        o.error = r.note;
        r.outcomes.push_back(std::move(o));
      }
      report.pairs[i] = std::move(r);
      return;
    }
    report.pairs[i] = explain_pair(env, *it->second, p.doc_id, cfg, methods);
  });
  for (const auto& m : methods) report.aggregates.push_back(aggregate(m, report.outcomes(m)));
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json explanation_to_json(const Explanation& e) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [w, c] : e) j[w] = c;
  return j;
}

inline Explanation explanation_from_json(const nlohmann::json& j) {
  Explanation e;
  for (const auto& [w, c] : j.items()) e[w] = c.get<int>();
  return e;
}

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json sparse_json(std::span<const double> v, std::span<const std::string> words) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) j[words[i]] = v[i];
  }
  return j;
}

}  // namespace detail

inline nlohmann::json to_json(const MethodOutcome& o) {
  nlohmann::json j = {{"method", o.method},
                      {"explanation", explanation_to_json(o.explanation)},
                      {"old_rank", o.old_rank},
                      {"new_rank", o.new_rank},
                      {"improved", o.improved},
                      {"failed", o.failed},
                      {"new_words", o.explanation.size()},
                      {"added_tokens", added_tokens(o.explanation)},
                      {"query_overlap", detail::optional_json(o.overlap)},
                      {"similarity", detail::optional_json(o.similarity)}};
  if (o.failed) j["error"] = o.error;
  return j;
}

/// Per-pair record. `full` adds the loss trace, vectors and candidates.
inline nlohmann::json to_json(const PairResult& r, bool full = false) {
  nlohmann::json j = {{"query_id", r.query_id}, {"doc_id", r.doc_id}, {"original_rank", r.original_rank},
                      {"seed", r.seed}};
  if (!r.note.empty()) j["note"] = r.note;
  j["methods"] = nlohmann::json::object();
  for (const auto& o : r.outcomes) j["methods"][o.method] = to_json(o);
  if (r.cfir) {
    const auto& d = *r.cfir;
    const auto& cf = d.cf;
    nlohmann::json c = {{"vocabulary_size", d.vocabulary.size()},
                        {"classifier_accuracy", d.classifier_accuracy},
                        {"original_prediction", d.original_prediction},
                        {"mode", cf.mode},
                        {"success", cf.success},
                        {"add_only_candidates", cf.add_only.size()},
                        {"attempts", cf.attempts},
                        {"seed_used", cf.seed_used},
                        {"iterations", cf.iterations},
                        {"initial_loss", cf.initial_loss()},
                        {"final_loss", cf.final_loss()},
                        {"trace_length", cf.loss_trace.size()},
                        {"categorical_change", cf.categorical_change},
                        {"d_vec", detail::sparse_json(d.d_vec, d.vocabulary)},
                        {"chosen", cf.chosen.empty() ? nlohmann::json() : detail::sparse_json(cf.chosen, d.vocabulary)}};
    if (full) {
      c["vocabulary"] = d.vocabulary;
      c["caps"] = d.caps;
      c["loss_trace"] = cf.loss_trace;
      c["candidates"] = nlohmann::json::array();
      for (const auto& cand : cf.candidates) c["candidates"].push_back(detail::sparse_json(cand, d.vocabulary));
    }
    j["cfir"] = std::move(c);
  }
  return j;
}

inline nlohmann::json to_json(const MethodAggregate& a) {
  return {{"method", a.method},
          {"pairs", a.pairs},
          {"improved", a.improved},
          {"failed", a.failed},
          {"fidelity", a.fidelity},
          {"avg_new_words", a.avg_new_words},
          {"avg_query_overlap", detail::optional_json(a.avg_query_overlap)},
          {"avg_rank_shift", detail::optional_json(a.avg_rank_shift)},
          {"avg_similarity", detail::optional_json(a.avg_similarity)}};
}

/// Report document. `timestamp` is the only field allowed to differ between
/// two runs with the same configuration.
inline nlohmann::json to_json(const EvalReport& report, const nlohmann::json& run_info = nlohmann::json::object(),
                              std::optional<std::string> timestamp = std::nullopt) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["formats"] = {{"report", kReportFormatVersion},
                  {"index", Corpus::kFormatVersion},
                  {"model", kModelFormatVersion}};
  j["model"] = report.model_name;
  j["config"] = report.config;
  j["run"] = run_info;
  j["generated_at"] = timestamp ? nlohmann::json(*timestamp) : nlohmann::json();
  j["aggregates"] = nlohmann::json::object();
  for (const auto& a : report.aggregates) j["aggregates"][a.method] = to_json(a);
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : report.pairs) j["pairs"].push_back(to_json(p));
  return j;
}

inline void write_aggregates_csv_header(std::ostream& out) {
  out << "method,model,K,n,k,pairs,improved,fidelity,avg_new_words,avg_query_overlap,avg_rank_shift,avg_similarity\n";
}

inline void write_aggregates_csv_row(std::ostream& out, const MethodAggregate& a, std::string_view model,
                                     const PipelineConfig& cfg) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << a.method << ',' << model << ',' << cfg.top_k << ',' << cfg.strategy.n << ',' << cfg.cf.k << ',' << a.pairs
      << ',' << a.improved << ',' << format_double(a.fidelity) << ',' << format_double(a.avg_new_words) << ','
      << opt(a.avg_query_overlap) << ',' << opt(a.avg_rank_shift) << ',' << opt(a.avg_similarity) << '\n';
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SweepParameter { TopK, NWords, CfK };

inline SweepParameter parse_sweep_parameter(std::string_view s) {
  if (s == "K" || s == "topk") return SweepParameter::TopK;
  if (s == "n" || s == "nwords") return SweepParameter::NWords;
  if (s == "k" || s == "cf-k") return SweepParameter::CfK;
  throw ConfigError("unknown sweep parameter \"" + std::string(s) + "\" (expected K, n or k)");
}

inline std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::TopK: return "K";
    case SweepParameter::NWords: return "n";
    case SweepParameter::CfK: return "k";
  }
  return "?";
}

inline PipelineConfig with_parameter(PipelineConfig cfg, SweepParameter p, std::size_t value) {
  switch (p) {
    case SweepParameter::TopK: cfg.top_k = value; break;
    case SweepParameter::NWords: cfg.strategy.n = value; break;
    case SweepParameter::CfK: cfg.cf.k = value; break;
  }
  return cfg;
}

inline void write_sweep_csv_header(std::ostream& out) {
  out << "parameter,value,";
  write_aggregates_csv_header(out);
}

}  // namespace cfir
