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

// The CLI subcommands, callable without going through argv.

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfir/bridge.hpp"
#include "cfir/config.hpp"
#include "cfir/corpus.hpp"
#include "cfir/pipeline.hpp"
#include "cfir/retrieval.hpp"
#include "cfir/surrogate.hpp"

namespace cfir::cli {

namespace fs = std::filesystem;

/// Loaded corpus, queries, embeddings and the selected retrieval model.
struct Inputs {
  Corpus corpus;
  std::vector<Query> queries;
  std::optional<EmbeddingTable> embeddings;
  std::unique_ptr<BridgeClient> bridge;
  std::unique_ptr<RetrievalModel> model;
  std::unique_ptr<TfIdfSpace> space;

  const EmbeddingTable* embeddings_ptr() const { return embeddings ? &*embeddings : nullptr; }
  ExplainEnv env() const { return ExplainEnv{*model, *space, embeddings_ptr()}; }
};

inline std::unique_ptr<Inputs> load_inputs(const RunConfig& cfg, bool need_queries) {
  auto in = std::make_unique<Inputs>();
  in->corpus = open_corpus(cfg.corpus);
  if (need_queries) in->queries = load_queries(cfg.queries);
  if (!cfg.embeddings.empty()) in->embeddings = load_embeddings(cfg.embeddings);
  if (cfg.model == "bm25") {
    in->model = std::make_unique<Bm25Model>(in->corpus);
  } else if (cfg.model == "embed") {
    in->model = std::make_unique<EmbeddingModel>(in->corpus, *in->embeddings);
  } else {
    in->bridge = BridgeClient::connect(BridgeEndpoint::parse(cfg.bridge), std::chrono::milliseconds(cfg.bridge_timeout_ms));
    in->model = std::make_unique<ExternalModel>(in->corpus, *in->bridge);
  }
  in->space = std::make_unique<TfIdfSpace>(in->corpus);
  return in;
}

inline const Query& find_query(const std::vector<Query>& queries, std::string_view id) {
  for (const auto& q : queries) {
    if (q.query_id == id) return q;
  }
  throw Error("unknown query_id: " + std::string(id));
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Inputs and settings that determine results; excludes output location and
/// parallelism.
inline nlohmann::json run_info(const RunConfig& cfg) {
  return {{"corpus", cfg.corpus},   {"queries", cfg.queries}, {"model", cfg.model},
          {"embeddings", cfg.embeddings}, {"bridge", cfg.bridge}, {"pairs", cfg.pairs},
          {"seed", cfg.pipeline.cf.seed}};
}

inline void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
}

inline void write_run_snapshot(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_file(fs::path(cfg.out) / "run_config.txt", snapshot(cfg));
}

inline std::string pair_slug(std::string_view q, std::string_view d) {
  std::string s = std::string(q) + "__" + std::string(d);
  for (auto& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

// ---------------------------------------------------------------------------

inline int cmd_index(const RunConfig& cfg, std::ostream& log) {
  auto corpus = Corpus::build(load_corpus(cfg.corpus));
  fs::create_directories(cfg.out);
  auto path = fs::path(cfg.out) / "index.cfir";
  corpus.save(path);
  write_run_snapshot(cfg);
  log << "indexed " << corpus.size() << " documents, " << corpus.index().num_terms() << " terms, avg length "
      << format_double(corpus.index().avg_doc_length()) << " -> " << path.string() << "\n";
  return 0;
}

inline int cmd_search(const RunConfig& cfg, std::size_t cutoff, bool to_stdout, std::ostream& out) {
  auto in = load_inputs(cfg, true);
  std::ostringstream run;
  for (const auto& q : in->queries) {
    write_trec_run(run, rank(*in->model, q, cutoff), "cfir_" + cfg.model);
  }
  if (to_stdout) {
    out << run.str();
  } else {
    write_file(fs::path(cfg.out) / "run.trec", run.str());
    write_run_snapshot(cfg);
  }
  return 0;
}

struct ExplainOptions {
  std::string query_id;
  std::string doc_id;
  bool dump_model = false;
  bool dump_dataset = false;
};

inline int cmd_explain(const RunConfig& cfg, const ExplainOptions& opt, std::ostream& out) {
  auto in = load_inputs(cfg, true);
  const auto& query = find_query(in->queries, opt.query_id);
  (void)in->corpus.position(opt.doc_id);
  auto ctx = QueryContext::make(*in->model, query);
  auto methods = all_methods();
  auto result = explain_pair(in->env(), ctx, opt.doc_id, cfg.pipeline, methods, true);

  auto report = to_json(result, true);
  report["format_version"] = kReportFormatVersion;
  report["model"] = in->model->name();
  report["config"] = to_json(cfg.pipeline);
  report["run"] = run_info(cfg);

  auto dir = fs::path(cfg.out) / "explain" / pair_slug(opt.query_id, opt.doc_id);
  fs::create_directories(dir);
  write_run_snapshot(cfg);
  if (result.cfir && result.cfir->model) {
    std::ofstream bin(dir / "model.bin", std::ios::binary);
    write_model(bin, *result.cfir->model);
    Vocabulary vocab(result.cfir->vocabulary);
    if (opt.dump_model) write_file(dir / "model.json", model_to_json(*result.cfir->model, vocab).dump(2) + "\n");
    if (opt.dump_dataset && result.cfir->dataset) {
      std::ofstream csv(dir / "dataset.csv");
      result.cfir->dataset->write_csv(csv);
    }
  }
  write_file(dir / "report.json", report.dump(2) + "\n");
  out << report.dump(2) << "\n";
  return 0;
}

struct EvaluateOptions {
  std::size_t n_queries = 50;
  std::size_t per_query = 5;
  std::size_t window = 90;
  bool write_pairs = true;
  bool with_timestamp = true;
};

/// Builds query contexts, selecting pairs automatically unless cfg.pairs is
/// set. Queries the model cannot score are reported in `skipped`.
struct PreparedEvaluation {
  std::vector<QueryContext> contexts;
  std::vector<TestPair> pairs;
  std::map<std::string, std::string> skipped;
};

inline PreparedEvaluation prepare_evaluation(const Inputs& in, const RunConfig& cfg, const EvaluateOptions& opt) {
  PreparedEvaluation prep;
  std::vector<Query> wanted;
  std::vector<TestPair> file_pairs;
  if (!cfg.pairs.empty()) {
    file_pairs = read_pairs_tsv(cfg.pairs);
    std::set<std::string> ids;
    for (const auto& p : file_pairs) ids.insert(p.query_id);
    for (const auto& q : in.queries) {
      if (ids.contains(q.query_id)) wanted.push_back(q);
    }
  } else {
    for (std::size_t i = 0; i < std::min(opt.n_queries, in.queries.size()); ++i) wanted.push_back(in.queries[i]);
  }
  std::vector<std::optional<QueryContext>> made(wanted.size());
  std::vector<std::string> errors(wanted.size());
  parallel_for(wanted.size(), cfg.jobs, [&](std::size_t i) {
    try {
      made[i] = QueryContext::make(*in.model, wanted[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    if (made[i]) {
      prep.contexts.push_back(std::move(*made[i]));
    } else {
      prep.skipped[wanted[i].query_id] = errors[i];
    }
  }
  if (!cfg.pairs.empty()) {
    prep.pairs = std::move(file_pairs);
  } else {
    auto floor = std::max(cfg.pipeline.eval_floor, cfg.pipeline.top_k);
    prep.pairs = auto_select_pairs(prep.contexts, opt.n_queries, opt.per_query, floor, opt.window, cfg.pipeline.cf.seed);
  }
  return prep;
}

inline EvalReport run_evaluation(const Inputs& in, const RunConfig& cfg, const EvaluateOptions& opt) {
  auto prep = prepare_evaluation(in, cfg, opt);
  return evaluate(in.env(), prep.contexts, prep.pairs, cfg.pipeline, all_methods(), cfg.jobs, prep.skipped);
}

inline int cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt, std::ostream& out) {
  auto in = load_inputs(cfg, true);
  auto report = run_evaluation(*in, cfg, opt);

  fs::create_directories(cfg.out);
  write_run_snapshot(cfg);
  auto doc = to_json(report, run_info(cfg), opt.with_timestamp ? std::optional(utc_timestamp()) : std::nullopt);
  write_file(fs::path(cfg.out) / "eval_report.json", doc.dump(2) + "\n");

  std::ostringstream csv;
  write_aggregates_csv_header(csv);
  for (const auto& a : report.aggregates) write_aggregates_csv_row(csv, a, report.model_name, cfg.pipeline);
  write_file(fs::path(cfg.out) / "eval_aggregates.csv", csv.str());

  if (opt.write_pairs) {
    for (const auto& p : report.pairs) {
      write_file(fs::path(cfg.out) / "pairs" / (pair_slug(p.query_id, p.doc_id) + ".json"), to_json(p, true).dump(1) + "\n");
    }
  }

  std::size_t failed = 0;
  for (const auto& p : report.pairs) {
    for (const auto& o : p.outcomes) failed += o.failed;
  }
  out << csv.str();
  out << "pairs: " << report.pairs.size() << ", failed method runs: " << failed << ", report: "
      << (fs::path(cfg.out) / "eval_report.json").string() << "\n";
  return 0;
}

inline int cmd_sweep(const RunConfig& cfg, SweepParameter param, const std::vector<std::size_t>& values,
                     const EvaluateOptions& opt, std::ostream& out) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  auto in = load_inputs(cfg, true);
  std::ostringstream csv;
  write_sweep_csv_header(csv);
  for (auto v : values) {
    RunConfig run = cfg;
    run.pipeline = with_parameter(cfg.pipeline, param, v);
    auto report = run_evaluation(*in, run, opt);
    for (const auto& a : report.aggregates) {
      csv << to_string(param) << ',' << v << ',';
      write_aggregates_csv_row(csv, a, report.model_name, run.pipeline);
    }
  }
  fs::create_directories(cfg.out);
  write_run_snapshot(cfg);
  auto path = fs::path(cfg.out) / ("sweep_" + to_string(param) + ".csv");
  write_file(path, csv.str());
  out << csv.str();
  return 0;
}

}  // namespace cfir::cli
