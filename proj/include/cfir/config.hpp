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

// Run configuration: a key=value file with optional [section] tables,
// overridden by command-line flags.
//
//   corpus = data/desk/corpus.jsonl
//   model = bm25
//   [cf]
//   k = 3          # same as cf-k
//   lambda1 = 1.0
//
// Inside a section, "key" resolves to "<section>-key" when that is a known
// setting, else to "key". Underscores and dashes are interchangeable.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfir/bridge.hpp"
#include "cfir/common.hpp"
#include "cfir/pipeline.hpp"

namespace cfir {

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "corpus",  "queries", "model",    "embeddings", "bridge", "topk",  "nwords", "strategy", "classifier",
      "cf-k",    "lambda1", "lambda2",  "max-iter",   "step",   "seed",  "jobs",   "out",      "epochs",
      "learning-rate", "n-estimators", "kprime", "pairs", "bridge-timeout"};
  return keys;
}

namespace detail {

inline std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

}  // namespace detail

/// Flat key -> value settings, later sources overriding earlier ones.
class Settings {
 public:
  static Settings parse(std::istream& in, const std::string& name = "<config>") {
    Settings s;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(name, lineno, "unterminated section header");
        section = detail::normalize_key(detail::trim(line.substr(1, line.size() - 2)));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(name, lineno, "expected key = value");
      auto key = detail::normalize_key(detail::trim(line.substr(0, eq)));
      auto value = detail::trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (!section.empty()) {
        auto scoped = section + "-" + key;
        key = config_keys().contains(scoped) ? scoped : key;
      }
      if (!config_keys().contains(key)) throw ParseError(name, lineno, "unknown setting \"" + key + "\"");
      s.values_[key] = value;
    }
    return s;
  }

  static Settings load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return parse(in, path.string());
  }

  void set(const std::string& key, std::string value) { values_[detail::normalize_key(key)] = std::move(value); }

  void merge(const Settings& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Fully resolved configuration of one CLI run.
struct RunConfig {
  std::string corpus;
  std::string queries;
  std::string model = "bm25";
  std::string embeddings;
  std::string bridge;
  std::uint64_t bridge_timeout_ms = 30000;
  std::string pairs;
  std::string out = "cfir_out";
  std::size_t jobs = 1;
  PipelineConfig pipeline;
};

namespace detail {

template <typename T>
bool parse_number(const std::string& s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Builds a RunConfig from settings. Every invalid field is reported in one
/// ConfigError, one line per field. `check_paths` lists the path settings
/// that must exist.
inline RunConfig resolve_config(const Settings& s, const std::set<std::string>& required = {},
                                const std::set<std::string>& check_paths = {}) {
  RunConfig c;
  std::vector<std::string> problems;

  auto str = [&](const std::string& key, std::string& field) {
    if (auto v = s.get(key)) field = *v;
  };
  auto num = [&](const std::string& key, auto& field) {
    if (auto v = s.get(key)) {
      std::remove_reference_t<decltype(field)> parsed{};
      if (detail::parse_number(*v, parsed)) {
        field = parsed;
      } else {
        problems.push_back(key + ": not a valid number: \"" + *v + "\"");
      }
    }
  };

  str("corpus", c.corpus);
  str("queries", c.queries);
  str("model", c.model);
  str("embeddings", c.embeddings);
  str("bridge", c.bridge);
  str("pairs", c.pairs);
  str("out", c.out);
  num("bridge-timeout", c.bridge_timeout_ms);
  num("jobs", c.jobs);
  auto& p = c.pipeline;
  num("topk", p.top_k);
  num("nwords", p.strategy.n);
  num("epochs", p.epochs);
  num("learning-rate", p.learning_rate);
  num("n-estimators", p.n_estimators);
  num("kprime", p.k_prime);
  num("cf-k", p.cf.k);
  num("lambda1", p.cf.lambda1);
  num("lambda2", p.cf.lambda2);
  num("max-iter", p.cf.max_iter);
  num("step", p.cf.step);

  if (auto v = s.get("seed")) {
    num("seed", p.cf.seed);
  } else if (const char* env = std::getenv("CFIR_SEED"); env != nullptr && *env != '\0') {
    if (!detail::parse_number(std::string(env), p.cf.seed)) problems.push_back("CFIR_SEED: not a valid seed");
  }

  if (auto v = s.get("strategy")) {
    try {
      p.strategy.kind = parse_importance_kind(*v);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("strategy: ") + e.what());
    }
  }
  if (auto v = s.get("classifier")) {
    try {
      p.classifier = parse_classifier_kind(*v);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("classifier: ") + e.what());
    }
  }

  for (const auto& key : required) {
    if (!s.get(key) || s.get(key)->empty()) problems.push_back(key + ": required");
  }
  for (const auto& key : check_paths) {
    auto v = s.get(key);
    if (v && !v->empty() && !std::filesystem::exists(*v)) problems.push_back(key + ": no such file: " + *v);
  }

  if (c.model != "bm25" && c.model != "embed" && c.model != "external") {
    problems.push_back("model: expected exactly one of bm25, embed, external; got \"" + c.model + "\"");
  }
  if (c.model == "embed" && c.embeddings.empty()) problems.push_back("embeddings: required by model embed");
  if (c.model == "external" && c.bridge.empty()) problems.push_back("bridge: required by model external");
  if (!c.bridge.empty()) {
    try {
      (void)BridgeEndpoint::parse(c.bridge);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("bridge: ") + e.what());
    }
  }
  if (p.strategy.kind == ImportanceKind::EmbedSim && c.embeddings.empty()) {
    problems.push_back("embeddings: required by strategy embed_sim");
  }
  if (p.strategy.kind == ImportanceKind::KeyBert) problems.push_back("strategy: keybert is not implemented");
  if (p.top_k < 1) problems.push_back("topk: must be >= 1");
  if (p.strategy.n < 1) problems.push_back("nwords: must be >= 1");
  if (p.cf.k < 1) problems.push_back("cf-k: must be >= 1");
  if (p.cf.lambda1 < 0) problems.push_back("lambda1: must be >= 0");
  if (p.cf.lambda2 < 0) problems.push_back("lambda2: must be >= 0");
  if (p.cf.max_iter < 1) problems.push_back("max-iter: must be >= 1");
  if (!(p.cf.step > 0)) problems.push_back("step: must be > 0");
  if (!(p.learning_rate > 0)) problems.push_back("learning-rate: must be > 0");
  if (p.n_estimators < 1) problems.push_back("n-estimators: must be >= 1");
  if (c.jobs < 1) problems.push_back("jobs: must be >= 1");

  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& pr : problems) msg += "\n  " + pr;
    throw ConfigError(msg);
  }
  return c;
}

/// key = value snapshot of the resolved configuration.
inline std::string snapshot(const RunConfig& c) {
  std::ostringstream out;
  out << "# resolved cfir configuration\n";
  out << "corpus = " << c.corpus << "\n";
  out << "queries = " << c.queries << "\n";
  out << "model = " << c.model << "\n";
  out << "embeddings = " << c.embeddings << "\n";
  out << "bridge = " << c.bridge << "\n";
  out << "pairs = " << c.pairs << "\n";
  out << "out = " << c.out << "\n";
  out << "jobs = " << c.jobs << "\n";
  const auto& p = c.pipeline;
  out << "topk = " << p.top_k << "\n";
  out << "nwords = " << p.strategy.n << "\n";
  out << "strategy = " << to_string(p.strategy.kind) << "\n";
  out << "classifier = " << to_string(p.classifier) << "\n";
  out << "learning-rate = " << format_double(p.learning_rate) << "\n";
  out << "epochs = " << p.epochs << "\n";
  out << "n-estimators = " << p.n_estimators << "\n";
  out << "kprime = " << p.k_prime << "\n";
  out << "seed = " << p.cf.seed << "\n";
  out << "[cf]\n";
  out << "k = " << p.cf.k << "\n";
  out << "lambda1 = " << format_double(p.cf.lambda1) << "\n";
  out << "lambda2 = " << format_double(p.cf.lambda2) << "\n";
  out << "max-iter = " << p.cf.max_iter << "\n";
  out << "step = " << format_double(p.cf.step) << "\n";
  out << "# formats: index v" << Corpus::kFormatVersion << ", model v" << kModelFormatVersion << ", report v"
      << kReportFormatVersion << "\n";
  return out.str();
}

}  // namespace cfir
