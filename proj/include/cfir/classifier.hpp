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

// Local surrogate classifiers: logistic regression and a random forest.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cfir/common.hpp"
#include "cfir/surrogate.hpp"

namespace cfir {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

inline void check_trainable(const SurrogateDataset& data) {
  if (data.instances.empty()) throw Error("cannot train on an empty dataset");
  if (data.count(0) == 0 || data.count(1) == 0) throw Error("cannot train on a single-class dataset");
  for (const auto& inst : data.instances) {
    if (inst.x.size() != data.dim()) throw Error("instance " + inst.doc_id + " has the wrong dimension");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression (no intercept)

struct LogisticModel {
  std::vector<double> weights;
  bool trained = false;
  std::vector<double> trace;  // mean cross-entropy before each epoch, then final
};

/// Mean binary cross-entropy of weights `w` on `data`.
inline double logistic_loss(std::span<const double> w, const SurrogateDataset& data) {
  double total = 0.0;
  for (const auto& inst : data.instances) {
    double z = dot(w, inst.x.values);
    // -[y ln s(z) + (1-y) ln(1-s(z))] = softplus(z) - y z
    total += softplus(z) - inst.label * z;
  }
  return total / static_cast<double>(data.instances.size());
}

inline std::vector<double> logistic_gradient(std::span<const double> w, const SurrogateDataset& data) {
  std::vector<double> g(w.size(), 0.0);
  for (const auto& inst : data.instances) {
    double r = sigmoid(dot(w, inst.x.values)) - inst.label;
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += r * inst.x.values[j];
  }
  for (auto& v : g) v /= static_cast<double>(data.instances.size());
  return g;
}

/// Full-batch gradient descent on mean cross-entropy.
inline LogisticModel train_logistic(const SurrogateDataset& data, double learning_rate = 0.001,
                                    std::size_t epochs = 1000) {
  detail::check_trainable(data);
  LogisticModel m;
  m.weights.assign(data.dim(), 0.0);
  m.trace.reserve(epochs + 1);
  for (std::size_t e = 0; e < epochs; ++e) {
    m.trace.push_back(logistic_loss(m.weights, data));
    auto g = logistic_gradient(m.weights, data);
    for (std::size_t j = 0; j < g.size(); ++j) m.weights[j] -= learning_rate * g[j];
  }
  m.trace.push_back(logistic_loss(m.weights, data));
  m.trained = true;
  return m;
}

// ---------------------------------------------------------------------------
// Random forest (entropy splits, bootstrap, sqrt(|V|) features per split)

struct TreeNode {
  std::int32_t feature = -1;  // -1 for leaves
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  int label = 0;  // leaf majority label
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                       : nodes[i].right);
    }
    return nodes[i].label;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (nodes[i].feature >= 0) {
        stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
        stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
      }
    }
    return best;
  }
};

struct ForestParams {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 10;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0 means floor(sqrt(dim)), at least 1
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t dim = 0;
  bool trained = false;
};

namespace detail {

inline double entropy(std::size_t pos, std::size_t n) {
  if (n == 0 || pos == 0 || pos == n) return 0.0;
  double p = static_cast<double>(pos) / static_cast<double>(n);
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const SurrogateDataset& data, const ForestParams& params, std::mt19937_64& rng)
      : data_(data), params_(params), rng_(rng) {
    features_ = params.max_features;
    if (features_ == 0) features_ = static_cast<std::size_t>(std::sqrt(static_cast<double>(data.dim())));
    features_ = std::clamp<std::size_t>(features_, 1, std::max<std::size_t>(1, data.dim()));
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  std::int32_t grow(DecisionTree& tree, std::vector<std::size_t> rows, std::size_t depth) {
    auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto r : rows) pos += data_.instances[r].label == 1;
    tree.nodes[id].label = 2 * pos >= rows.size() ? 1 : 0;
    if (pos == 0 || pos == rows.size() || depth >= params_.max_depth || rows.size() < 2 || data_.dim() == 0) {
      return id;
    }

    double parent = entropy(pos, rows.size());
    double best_gain = 0.0;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::size_t> candidates(data_.dim());
    std::iota(candidates.begin(), candidates.end(), 0);
    // Partial Fisher-Yates: first features_ entries are the sample.
    for (std::size_t i = 0; i < features_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng_)]);
    }
    std::vector<std::pair<double, int>> column(rows.size());
    for (std::size_t fi = 0; fi < features_; ++fi) {
      auto f = candidates[fi];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& inst = data_.instances[rows[i]];
        column[i] = {inst.x.values[f], inst.label};
      }
      std::sort(column.begin(), column.end());
      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second == 1;
        if (column[i].first == column[i + 1].first) continue;
        std::size_t nl = i + 1, nr = column.size() - nl;
        double child = (nl * entropy(left_pos, nl) + nr * entropy(pos - left_pos, nr)) / column.size();
        double gain = parent - child;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.instances[r].x.values[static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    auto l = grow(tree, std::move(left), depth + 1);
    auto r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const SurrogateDataset& data_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  std::size_t features_;
};

}  // namespace detail

/// Bagged entropy trees. Tree t draws from its own seed, mix64(seed + t).
inline ForestModel train_forest(const SurrogateDataset& data, const ForestParams& params = {}) {
  detail::check_trainable(data);
  if (params.n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
  ForestModel forest;
  forest.dim = data.dim();
  forest.trees.reserve(params.n_estimators);
  auto n = data.instances.size();
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    std::mt19937_64 rng(mix64(params.seed + t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    detail::TreeBuilder builder(data, params, rng);
    forest.trees.push_back(builder.build(std::move(rows)));
  }
  forest.trained = true;
  return forest;
}

// ---------------------------------------------------------------------------
// Common prediction surface

using Classifier = std::variant<LogisticModel, ForestModel>;

inline constexpr double kForestLogitClamp = 15.0;

namespace detail {

inline void check_input(bool trained, std::size_t dim, std::size_t got) {
  if (!trained) throw Error("classifier is not trained");
  if (dim != got) throw Error("feature vector has length " + std::to_string(got) + ", model expects " + std::to_string(dim));
}

}  // namespace detail

inline double prob(const LogisticModel& m, std::span<const double> x) {
  detail::check_input(m.trained, m.weights.size(), x.size());
  return sigmoid(dot(m.weights, x));
}

inline double logit(const LogisticModel& m, std::span<const double> x) {
  detail::check_input(m.trained, m.weights.size(), x.size());
  return dot(m.weights, x);
}

inline int predict(const LogisticModel& m, std::span<const double> x) { return logit(m, x) >= 0.0 ? 1 : 0; }

/// Fraction of trees voting for class 1.
inline double prob(const ForestModel& m, std::span<const double> x) {
  detail::check_input(m.trained, m.dim, x.size());
  std::size_t votes = 0;
  for (const auto& t : m.trees) votes += t.predict(x) == 1;
  return static_cast<double>(votes) / static_cast<double>(m.trees.size());
}

inline double logit(const ForestModel& m, std::span<const double> x) {
  double p = prob(m, x);
  if (p <= 0.0) return -kForestLogitClamp;
  if (p >= 1.0) return kForestLogitClamp;
  return std::clamp(std::log(p / (1.0 - p)), -kForestLogitClamp, kForestLogitClamp);
}

inline int predict(const ForestModel& m, std::span<const double> x) { return prob(m, x) >= 0.5 ? 1 : 0; }

inline double prob(const Classifier& c, std::span<const double> x) {
  return std::visit([&](const auto& m) { return prob(m, x); }, c);
}
inline double logit(const Classifier& c, std::span<const double> x) {
  return std::visit([&](const auto& m) { return logit(m, x); }, c);
}
inline int predict(const Classifier& c, std::span<const double> x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, c);
}

template <typename Model>
double accuracy(const Model& model, const SurrogateDataset& data) {
  if (data.instances.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& inst : data.instances) correct += predict(model, inst.x.values) == inst.label;
  return static_cast<double>(correct) / static_cast<double>(data.instances.size());
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kModelMagic = "CFIRMDL\n";
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void write_model(std::ostream& out, const Classifier& c) {
  io::BinaryWriter w(out);
  w.put_bytes(kModelMagic);
  w.put(kModelFormatVersion);
  if (const auto* lr = std::get_if<LogisticModel>(&c)) {
    w.put<std::uint8_t>(0);
    w.put<std::uint8_t>(lr->trained);
    w.put<std::uint64_t>(lr->weights.size());
    for (double v : lr->weights) w.put(v);
    w.put<std::uint64_t>(lr->trace.size());
    for (double v : lr->trace) w.put(v);
  } else {
    const auto& rf = std::get<ForestModel>(c);
    w.put<std::uint8_t>(1);
    w.put<std::uint8_t>(rf.trained);
    w.put<std::uint64_t>(rf.dim);
    w.put<std::uint64_t>(rf.trees.size());
    for (const auto& t : rf.trees) {
      w.put<std::uint64_t>(t.nodes.size());
      for (const auto& n : t.nodes) {
        w.put(n.feature);
        w.put(n.threshold);
        w.put(n.left);
        w.put(n.right);
        w.put<std::int32_t>(n.label);
      }
    }
  }
}

inline Classifier read_model(std::istream& in) {
  io::BinaryReader r(in);
  if (r.get_bytes(kModelMagic.size()) != kModelMagic) throw Error("not a cfir model file");
  if (auto v = r.get<std::uint32_t>(); v != kModelFormatVersion) {
    throw Error("unsupported model format version " + std::to_string(v));
  }
  auto kind = r.get<std::uint8_t>();
  if (kind == 0) {
    LogisticModel m;
    m.trained = r.get<std::uint8_t>() != 0;
    m.weights.resize(r.get<std::uint64_t>());
    for (auto& v : m.weights) v = r.get<double>();
    m.trace.resize(r.get<std::uint64_t>());
    for (auto& v : m.trace) v = r.get<double>();
    return m;
  }
  if (kind != 1) throw Error("unknown model kind " + std::to_string(kind));
  ForestModel m;
  m.trained = r.get<std::uint8_t>() != 0;
  m.dim = r.get<std::uint64_t>();
  m.trees.resize(r.get<std::uint64_t>());
  for (auto& t : m.trees) {
    t.nodes.resize(r.get<std::uint64_t>());
    for (auto& n : t.nodes) {
      n.feature = r.get<std::int32_t>();
      n.threshold = r.get<double>();
      n.left = r.get<std::int32_t>();
      n.right = r.get<std::int32_t>();
      n.label = r.get<std::int32_t>();
      if (n.feature >= static_cast<std::int32_t>(m.dim)) throw Error("model corrupt: split feature out of range");
    }
  }
  return m;
}

/// Human-readable dump: weights by word for the logistic model, node lists
/// for the forest.
inline nlohmann::json model_to_json(const Classifier& c, const Vocabulary& vocab) {
  nlohmann::json j;
  if (const auto* lr = std::get_if<LogisticModel>(&c)) {
    j["type"] = "logistic";
    j["weights"] = nlohmann::json::object();
    for (std::size_t i = 0; i < lr->weights.size(); ++i) {
      j["weights"][i < vocab.size() ? vocab.word(i) : std::to_string(i)] = lr->weights[i];
    }
    j["final_loss"] = lr->trace.empty() ? nlohmann::json() : nlohmann::json(lr->trace.back());
  } else {
    const auto& rf = std::get<ForestModel>(c);
    j["type"] = "forest";
    j["trees"] = nlohmann::json::array();
    for (const auto& t : rf.trees) {
      auto nodes = nlohmann::json::array();
      for (const auto& n : t.nodes) {
        if (n.feature < 0) {
          nodes.push_back({{"leaf", n.label}});
        } else {
          auto f = static_cast<std::size_t>(n.feature);
          nodes.push_back({{"feature", f < vocab.size() ? vocab.word(f) : std::to_string(f)},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right}});
        }
      }
      j["trees"].push_back(std::move(nodes));
    }
  }
  return j;
}

}  // namespace cfir
