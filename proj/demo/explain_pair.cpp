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

// Library walk-through: explain why a document ranked 15th is not in the
// BM25 top-10, one step at a time.
//
//   explain_pair_demo data/desk/corpus.jsonl data/desk/queries.tsv [query_id]

#include <iostream>

#include "cfir/cf_engine.hpp"
#include "cfir/classifier.hpp"
#include "cfir/corpus.hpp"
#include "cfir/importance.hpp"
#include "cfir/retrieval.hpp"
#include "cfir/surrogate.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: " << argv[0] << " corpus.jsonl queries.tsv [query_id]\n";
    return 2;
  }
  try {
    auto corpus = cfir::Corpus::build(cfir::load_corpus(argv[1]));
    auto queries = cfir::load_queries(argv[2]);
    const cfir::Query* query = &queries.front();
    for (const auto& q : queries) {
      if (argc > 3 && q.query_id == argv[3]) query = &q;
    }

    cfir::Bm25Model bm25(corpus);
    auto ranking = cfir::rank(bm25, *query, corpus.size());
    const std::size_t K = 10;
    const auto& target = corpus.at(ranking.entries[14].doc_id);
    std::cout << "query " << query->query_id << ": \"" << query->raw_text << "\"\n";
    std::cout << "document " << target.doc_id << " at rank 15\n";

    std::vector<const cfir::Document*> top;
    for (const auto& id : ranking.top_ids(K)) top.push_back(&corpus.at(id));
    cfir::ImportanceContext ictx{corpus.index(), nullptr};
    auto vocab = cfir::build_vocabulary(top, *query, {cfir::ImportanceKind::TfIdf, 10}, ictx);
    std::cout << "feature space: " << vocab.size() << " words\n";

    cfir::TfIdfSpace space(corpus);
    auto data = cfir::build_dataset(corpus, space, ranking, target.doc_id, K, vocab);
    cfir::Classifier model = cfir::train_logistic(data);
    std::cout << "classifier accuracy on its training set: " << cfir::accuracy(model, data) << "\n";

    auto x = cfir::vectorize(target, vocab).values;
    auto caps = cfir::coordinate_caps(data);
    cfir::CfConfig cfg;
    cfg.seed = cfir::derive_seed(0, query->query_id, target.doc_id);
    auto result = cfir::generate(model, x, caps, vocab, cfg);
    std::cout << "relaxed loss " << result.initial_loss() << " -> " << result.final_loss() << " ("
              << result.iterations << " iterations, " << result.mode << ")\n";
    if (!result.success) {
      std::cout << "no add-only counterfactual found\n";
      return 0;
    }
    std::cout << "add:";
    for (const auto& [w, n] : result.explanation) std::cout << ' ' << w << " x" << n;
    std::cout << "\n";

    auto edited = cfir::apply_explanation(target, result.explanation);
    auto scores = bm25.score_corpus(*query);
    std::cout << "new rank: " << cfir::rank_with_replacement(corpus, scores, {edited.doc_id, bm25.score(*query, edited)})
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
