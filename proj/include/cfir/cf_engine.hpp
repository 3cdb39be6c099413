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

// Counterfactual generation over term-frequency vectors.
//
// k candidates c_1..c_k are optimised jointly against
//
//   (1/k) sum_i yloss(c_i) + (lambda1/k) sum_i dist(c_i, x) - lambda2 det(K)
//
// where yloss is the hinge max(0, 1 - z logit(c)), dist is the number of
// coordinates that differ and K_ij = 1 / (1 + dist(c_i, c_j)). Features are
// integer counts; the search runs on the relaxation
// dist(a, b) = sum_p |a_p - b_p| / cap_p inside the box [0, cap] and rounds
// at the end. Among the rounded candidates, one that never lowers a term
// frequency of x is drawn at random; the words it adds are the explanation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cfir/classifier.hpp"
#include "cfir/common.hpp"
#include "cfir/corpus.hpp"
#include "cfir/importance.hpp"
#include "cfir/surrogate.hpp"

namespace cfir {

struct CfConfig {
  std::size_t k = 3;
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  std::size_t max_iter = 500;
  double step = 0.05;
  int desired = 1;
  std::uint64_t seed = 0;
};

inline void validate(const CfConfig& c) {
  if (c.k < 1) throw ConfigError("cf k must be >= 1");
  if (c.lambda1 < 0 || c.lambda2 < 0) throw ConfigError("lambda1 and lambda2 must be >= 0");
  if (c.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(c.step > 0)) throw ConfigError("step must be > 0");
  if (c.desired != 0 && c.desired != 1) throw ConfigError("desired label must be 0 or 1");
}

/// Word -> number of added occurrences. Ordered for deterministic output.
using Explanation = std::map<std::string, int>;

inline std::size_t added_tokens(const Explanation& e) {
  std::size_t n = 0;
  for (const auto& [_, c] : e) n += static_cast<std::size_t>(c);
  return n;
}

// ---------------------------------------------------------------------------
// Loss components

inline double yloss(double logit_value, int desired) {
  double z = desired == 0 ? -1.0 : 1.0;
  return std::max(0.0, 1.0 - z * logit_value);
}

inline double yloss(const Classifier& model, std::span<const double> c, int desired) {
  return yloss(logit(model, c), desired);
}

/// Number of coordinates where the vectors differ.
inline double categorical_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("distance: length mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return static_cast<double>(n);
}

/// Continuous stand-in for categorical_distance used during optimisation.
inline double relaxed_distance(std::span<const double> a, std::span<const double> b, std::span<const double> caps) {
  if (a.size() != b.size() || a.size() != caps.size()) throw Error("distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]) / caps[i];
  return s;
}

/// Determinant by LU decomposition with partial pivoting.
inline double determinant(std::vector<std::vector<double>> m) {
  const auto n = m.size();
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    if (m[pivot][col] == 0.0) return 0.0;
    if (pivot != col) {
      std::swap(m[pivot], m[col]);
      det = -det;
    }
    det *= m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

/// K_ij = 1 / (1 + d(c_i, c_j)).
template <typename Distance>
std::vector<std::vector<double>> diversity_kernel(std::span<const std::vector<double>> candidates, Distance&& dist) {
  const auto k = candidates.size();
  std::vector<std::vector<double>> kernel(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double v = 1.0 / (1.0 + dist(candidates[i], candidates[j]));
      kernel[i][j] = kernel[j][i] = v;
    }
  }
  return kernel;
}

/// det(K) over the full k x k kernel.
template <typename Distance>
double diversity(std::span<const std::vector<double>> candidates, Distance&& dist) {
  return determinant(diversity_kernel(candidates, std::forward<Distance>(dist)));
}

inline double diversity(std::span<const std::vector<double>> candidates) {
  return diversity(candidates, [](const auto& a, const auto& b) { return categorical_distance(a, b); });
}

/// Cofactor matrix: C_ab = (-1)^(a+b) det(minor_ab) = d det / d K_ab.
inline std::vector<std::vector<double>> cofactors(const std::vector<std::vector<double>>& m) {
  const auto n = m.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(n, 1.0));
  if (n == 1) return c;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<std::vector<double>> minor;
      minor.reserve(n - 1);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == a) continue;
        std::vector<double> row;
        row.reserve(n - 1);
        for (std::size_t col = 0; col < n; ++col) {
          if (col != b) row.push_back(m[r][col]);
        }
        minor.push_back(std::move(row));
      }
      c[a][b] = ((a + b) % 2 == 0 ? 1.0 : -1.0) * determinant(std::move(minor));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Relaxed objective

struct ObjectiveParts {
  double yloss = 0.0;      // mean hinge
  double proximity = 0.0;  // (lambda1 / k) * sum relaxed dist to x
  double diversity = 0.0;  // det(K) on relaxed distances
  double total = 0.0;
};

inline ObjectiveParts relaxed_objective(const Classifier& model, std::span<const std::vector<double>> candidates,
                                        std::span<const double> x, std::span<const double> caps,
                                        const CfConfig& cfg) {
  ObjectiveParts o;
  const auto k = static_cast<double>(candidates.size());
  for (const auto& c : candidates) {
    o.yloss += yloss(model, c, cfg.desired);
    o.proximity += relaxed_distance(c, x, caps);
  }
  o.yloss /= k;
  o.proximity *= cfg.lambda1 / k;
  o.diversity = diversity(candidates, [&](const auto& a, const auto& b) { return relaxed_distance(a, b, caps); });
  o.total = o.yloss + o.proximity - cfg.lambda2 * o.diversity;
  return o;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

/// (Sub)gradient of relaxed_objective for a logistic surrogate. At kinks
/// (hinge point, |.| at zero) the zero subgradient is used.
inline std::vector<std::vector<double>> relaxed_gradient(const LogisticModel& model,
                                                         std::span<const std::vector<double>> candidates,
                                                         std::span<const double> x, std::span<const double> caps,
                                                         const CfConfig& cfg) {
  const auto k = candidates.size();
  const auto dim = x.size();
  const double z = cfg.desired == 0 ? -1.0 : 1.0;
  std::vector<std::vector<double>> grad(k, std::vector<double>(dim, 0.0));

  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = candidates[i];
    if (1.0 - z * logit(model, c) > 0.0) {
      for (std::size_t p = 0; p < dim; ++p) grad[i][p] -= z * model.weights[p] / static_cast<double>(k);
    }
    for (std::size_t p = 0; p < dim; ++p) {
      grad[i][p] += cfg.lambda1 / static_cast<double>(k) * sign(c[p] - x[p]) / caps[p];
    }
  }

  if (k > 1 && cfg.lambda2 != 0.0) {
    auto dist = [&](const auto& a, const auto& b) { return relaxed_distance(a, b, caps); };
    auto kernel = diversity_kernel(candidates, dist);
    auto cof = cofactors(kernel);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        if (a == b) continue;
        // d det / d D_ab through both symmetric entries; dK/dD = -K^2.
        double coeff = (cof[a][b] + cof[b][a]) * -(kernel[a][b] * kernel[a][b]);
        for (std::size_t p = 0; p < dim; ++p) {
          double d_det = coeff * sign(candidates[a][p] - candidates[b][p]) / caps[p];
          grad[a][p] -= cfg.lambda2 * d_det;
        }
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Generation

struct CounterfactualResult {
  std::vector<double> chosen;                        // empty when nothing qualified
  std::vector<std::vector<double>> candidates;       // rounded final candidates
  std::vector<double> loss_trace;                    // relaxed objective per iteration, then final
  std::vector<std::size_t> add_only;                 // indices of add-only candidates
  bool success = false;                              // add-only candidate found and predicted `desired`
  // Explanation of `chosen`; kept even when the surrogate does not flip.
  std::size_t attempts = 0;
  std::uint64_t seed_used = 0;
  std::size_t iterations = 0;
  std::string mode;                                  // "gradient" or "hill_climb"
  Explanation explanation;
  double categorical_change = 0.0;                   // categorical dist(chosen, x)

  double initial_loss() const { return loss_trace.empty() ? 0.0 : loss_trace.front(); }
  double final_loss() const { return loss_trace.empty() ? 0.0 : loss_trace.back(); }
};

/// cap_p = max(3, largest tf of word p over the positive instances).
inline std::vector<double> coordinate_caps(const SurrogateDataset& data, double floor = 3.0) {
  std::vector<double> caps(data.dim(), floor);
  for (const auto& inst : data.instances) {
    if (inst.label != 1) continue;
    for (std::size_t p = 0; p < caps.size(); ++p) caps[p] = std::max(caps[p], inst.x.values[p]);
  }
  return caps;
}

/// Words whose count in `c` exceeds the original, with the excess as count.
inline Explanation extract_explanation(std::span<const double> c, std::span<const double> original,
                                       const Vocabulary& vocab) {
  if (c.size() != original.size() || c.size() != vocab.size()) throw Error("extract_explanation: length mismatch");
  Explanation e;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (c[j] > original[j]) e[vocab.word(j)] = static_cast<int>(std::lround(c[j] - original[j]));
  }
  return e;
}

/// Appends each explanation word `count` times.
inline Document apply_explanation(const Document& doc, const Explanation& e) {
  Document out = doc;
  for (const auto& [word, count] : e) {
    for (int i = 0; i < count; ++i) {
      out.tokens.push_back(word);
      out.raw_text += (out.raw_text.empty() ? "" : " ") + word;
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<double>> random_start(std::size_t k, std::span<const double> caps,
                                                     std::mt19937_64& rng) {
  std::vector<std::vector<double>> cands(k, std::vector<double>(caps.size()));
  for (auto& c : cands) {
    for (std::size_t p = 0; p < caps.size(); ++p) c[p] = std::uniform_real_distribution<double>(0.0, caps[p])(rng);
  }
  return cands;
}

inline void project(std::vector<double>& c, std::span<const double> caps) {
  for (std::size_t p = 0; p < c.size(); ++p) c[p] = std::clamp(c[p], 0.0, caps[p]);
}

inline void round_to_grid(std::vector<double>& c, std::span<const double> caps) {
  for (std::size_t p = 0; p < c.size(); ++p) c[p] = std::clamp(std::round(c[p]), 0.0, std::floor(caps[p]));
}

inline void descend(const LogisticModel& model, std::vector<std::vector<double>>& cands, std::span<const double> x,
                    std::span<const double> caps, const CfConfig& cfg, std::size_t iters,
                    std::vector<double>& trace) {
  Classifier view = model;
  for (std::size_t t = 0; t < iters; ++t) {
    trace.push_back(relaxed_objective(view, cands, x, caps, cfg).total);
    auto g = relaxed_gradient(model, cands, x, caps, cfg);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      for (std::size_t p = 0; p < x.size(); ++p) cands[i][p] -= cfg.step * g[i][p];
      project(cands[i], caps);
    }
  }
  trace.push_back(relaxed_objective(view, cands, x, caps, cfg).total);
}

// Greedy ±1 moves on one random coordinate of each candidate per iteration;
// a move is kept when the joint objective does not increase.
inline void hill_climb(const Classifier& model, std::vector<std::vector<double>>& cands, std::span<const double> x,
                       std::span<const double> caps, const CfConfig& cfg, std::size_t iters, std::mt19937_64& rng,
                       std::vector<double>& trace) {
  for (auto& c : cands) round_to_grid(c, caps);
  double current = relaxed_objective(model, cands, x, caps, cfg).total;
  std::uniform_int_distribution<std::size_t> coord(0, x.size() - 1);
  std::bernoulli_distribution up(0.5);
  for (std::size_t t = 0; t < iters; ++t) {
    trace.push_back(current);
    for (auto& c : cands) {
      auto p = coord(rng);
      double delta = up(rng) ? 1.0 : -1.0;
      double next = c[p] + delta;
      if (next < 0.0 || next > std::floor(caps[p])) continue;
      double saved = c[p];
      c[p] = next;
      double value = relaxed_objective(model, cands, x, caps, cfg).total;
      if (value <= current) {
        current = value;
      } else {
        c[p] = saved;
      }
    }
  }
  trace.push_back(current);
}

}  // namespace detail

/// Optimises k candidates for `x` and post-selects an add-only one. If no
/// candidate is add-only the search is repeated once with a fresh seed and
/// twice the iterations; a second miss yields success == false.
inline CounterfactualResult generate(const Classifier& model, std::span<const double> x, std::span<const double> caps,
                                     const Vocabulary& vocab, const CfConfig& cfg) {
  validate(cfg);
  if (x.size() != caps.size() || x.size() != vocab.size()) throw Error("generate: length mismatch");
  for (double c : caps) {
    if (!(c > 0)) throw Error("generate: caps must be positive");
  }

  CounterfactualResult result;
  result.mode = std::holds_alternative<LogisticModel>(model) ? "gradient" : "hill_climb";
  std::uint64_t seed = cfg.seed;
  std::size_t iters = cfg.max_iter;

  for (std::size_t attempt = 0; attempt < 2; ++attempt) {
    result.attempts = attempt + 1;
    result.seed_used = seed;
    result.iterations = iters;
    result.loss_trace.clear();
    std::mt19937_64 rng(seed);
    auto cands = detail::random_start(cfg.k, caps, rng);
    if (x.empty()) {
      // Nothing to optimise over.
    } else if (const auto* lr = std::get_if<LogisticModel>(&model)) {
      detail::descend(*lr, cands, x, caps, cfg, iters, result.loss_trace);
    } else {
      detail::hill_climb(model, cands, x, caps, cfg, iters, rng, result.loss_trace);
    }
    for (auto& c : cands) detail::round_to_grid(c, caps);

    result.add_only.clear();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      bool ok = true;
      for (std::size_t p = 0; p < x.size() && ok; ++p) ok = cands[i][p] >= x[p];
      if (ok) result.add_only.push_back(i);
    }
    result.candidates = std::move(cands);
    if (!result.add_only.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, result.add_only.size() - 1);
      result.chosen = result.candidates[result.add_only[pick(rng)]];
      break;
    }
    seed = mix64(seed ^ 0x5eed5eed5eed5eedULL);
    iters *= 2;
  }

  if (!result.chosen.empty()) {
    result.success = predict(model, result.chosen) == cfg.desired;
    result.categorical_change = categorical_distance(result.chosen, x);
    result.explanation = extract_explanation(result.chosen, x, vocab);
  }
  return result;
}

}  // namespace cfir
