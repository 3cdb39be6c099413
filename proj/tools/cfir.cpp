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

// cfir: index, search, explain, evaluate, sweep.

#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfir/commands.hpp"

namespace {

// Flags that map one-to-one onto configuration keys.
const std::vector<std::pair<std::string, std::string>> kSettingFlags = {
    {"--corpus", "corpus corpus (JSONL) or index file"},
    {"--queries", "queries TSV"},
    {"--model", "retrieval model: bm25, embed or external"},
    {"--embeddings", "word vectors (text format)"},
    {"--bridge", "external scorer: exec:<command> or tcp:<host>:<port>"},
    {"--topk", "K, size of the positive class"},
    {"--nwords", "n, important words per top-K document"},
    {"--strategy", "importance strategy: tfidf or embed_sim"},
    {"--classifier", "surrogate classifier: lr or rf"},
    {"--cf-k", "number of counterfactual candidates"},
    {"--lambda1", "proximity weight"},
    {"--lambda2", "diversity weight"},
    {"--max-iter", "optimizer iterations"},
    {"--step", "optimizer step size"},
    {"--seed", "base seed (falls back to CFIR_SEED)"},
    {"--jobs", "worker threads"},
    {"--out", "output directory"},
    {"--epochs", "logistic regression epochs"},
    {"--learning-rate", "logistic regression learning rate"},
    {"--n-estimators", "random forest size"},
    {"--kprime", "relevance set size of the Top-K' baseline"},
    {"--pairs", "TSV of query_id, doc_id pairs"},
    {"--bridge-timeout", "bridge timeout in milliseconds"},
};

struct Flags {
  std::string config;
  std::map<std::string, std::string> values;
};

void add_setting_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& [name, help] : kSettingFlags) {
    auto key = name.substr(2);
    cmd->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help);
  }
}

cfir::RunConfig resolve(const Flags& flags, const std::set<std::string>& required) {
  cfir::Settings settings;
  if (!flags.config.empty()) settings = cfir::Settings::load(flags.config);
  for (const auto& [k, v] : flags.values) settings.set(k, v);
  return cfir::resolve_config(settings, required, {"corpus", "queries", "embeddings", "pairs"});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual explanations for retrieval models"};
  app.require_subcommand(1);

  Flags flags;

  auto* index = app.add_subcommand("index", "build and persist the inverted index");
  add_setting_flags(index, flags);

  std::size_t cutoff = 100;
  bool to_stdout = false;
  auto* search = app.add_subcommand("search", "rank every query and write a TREC run");
  add_setting_flags(search, flags);
  search->add_option("--cutoff", cutoff, "depth of the run")->check(CLI::PositiveNumber);
  search->add_flag("--stdout", to_stdout, "write the run to stdout instead of <out>/run.trec");

  cfir::cli::ExplainOptions explain_opt;
  auto* explain = app.add_subcommand("explain", "explain one (query, document) pair");
  add_setting_flags(explain, flags);
  explain->add_option("--query-id", explain_opt.query_id, "query id")->required();
  explain->add_option("--doc-id", explain_opt.doc_id, "document id")->required();
  explain->add_flag("--dump-model", explain_opt.dump_model, "also write the classifier as JSON");
  explain->add_flag("--dump-dataset", explain_opt.dump_dataset, "also write the training set as CSV");

  cfir::cli::EvaluateOptions eval_opt;
  bool no_timestamp = false;
  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--num-queries", eval_opt.n_queries, "queries used by auto-selection");
    cmd->add_option("--per-query", eval_opt.per_query, "documents per query used by auto-selection");
    cmd->add_flag("--no-timestamp", no_timestamp, "omit generated_at from the report");
  };
  auto* evaluate = app.add_subcommand("evaluate", "run CFIR and the baselines over a pair set");
  add_setting_flags(evaluate, flags);
  add_eval_flags(evaluate);
  bool no_pair_files = false;
  evaluate->add_flag("--no-pair-files", no_pair_files, "skip the per-pair JSON traces");

  std::string sweep_param;
  std::vector<std::size_t> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "evaluate over a range of one parameter");
  add_setting_flags(sweep, flags);
  add_eval_flags(sweep);
  sweep->add_option("--param", sweep_param, "topk, nwords or cf-k")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required()->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    eval_opt.with_timestamp = !no_timestamp;
    if (index->parsed()) return cfir::cli::cmd_index(resolve(flags, {"corpus"}), std::cerr);
    if (search->parsed()) return cfir::cli::cmd_search(resolve(flags, {"corpus", "queries"}), cutoff, to_stdout, std::cout);
    if (explain->parsed()) return cfir::cli::cmd_explain(resolve(flags, {"corpus", "queries"}), explain_opt, std::cout);
    if (evaluate->parsed()) {
      eval_opt.write_pairs = !no_pair_files;
      return cfir::cli::cmd_evaluate(resolve(flags, {"corpus", "queries"}), eval_opt, std::cout);
    }
    if (sweep->parsed()) {
      eval_opt.write_pairs = false;
      auto param = cfir::parse_sweep_parameter(sweep_param);
      return cfir::cli::cmd_sweep(resolve(flags, {"corpus", "queries"}), param, sweep_values, eval_opt, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "cfir: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
