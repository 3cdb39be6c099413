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

// Documents, queries, the tokenizer and the inverted index every scorer reads.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cfir/common.hpp"

namespace cfir {

struct Document {
  std::string doc_id;
  std::string raw_text;
  std::vector<std::string> tokens;

  std::size_t length() const { return tokens.size(); }
};

struct Query {
  std::string query_id;
  std::string raw_text;
  std::vector<std::string> tokens;
};

namespace detail {

inline const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",        "about",   "above",   "after",   "again",   "against", "ain",     "all",
      "am",       "an",      "and",     "any",     "are",     "aren",    "as",      "at",
      "be",       "because", "been",    "before",  "being",   "below",   "between", "both",
      "but",      "by",      "can",     "couldn",  "did",     "didn",    "do",      "does",
      "doesn",    "doing",   "don",     "down",    "during",  "each",    "few",     "for",
      "from",     "further", "had",     "hadn",    "has",     "hasn",    "have",    "haven",
      "having",   "he",      "her",     "here",    "hers",    "herself", "him",     "himself",
      "his",      "how",     "i",       "if",      "in",      "into",    "is",      "isn",
      "it",       "its",     "itself",  "just",    "ll",      "ma",      "me",      "mightn",
      "more",     "most",    "mustn",   "my",      "myself",  "needn",   "no",      "nor",
      "not",      "now",     "of",      "off",     "on",      "once",    "only",    "or",
      "other",    "our",     "ours",    "ourselves", "out",   "over",    "own",     "re",
      "same",     "shan",    "she",     "should",  "shouldn", "so",      "some",    "such",
      "than",     "that",    "the",     "their",   "theirs",  "them",    "themselves", "then",
      "there",    "these",   "they",    "this",    "those",   "through", "to",      "too",
      "under",    "until",   "up",      "ve",      "very",    "was",     "wasn",    "we",
      "were",     "weren",   "what",    "when",    "where",   "which",   "while",   "who",
      "whom",     "why",     "will",    "with",    "won",     "would",   "wouldn",  "you",
      "your",     "yours",   "yourself", "yourselves",
  };
  return words;
}

// Decodes one UTF-8 code point starting at text[i]; advances i. Malformed
// bytes decode as U+FFFD.
inline char32_t next_code_point(std::string_view text, std::size_t& i) {
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  unsigned char c = byte(i);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xE ? 2 : (c >> 3) == 0x1E ? 3 : -1;
  if (extra < 0 || i + static_cast<std::size_t>(extra) >= text.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = c & (0x3F >> extra);
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = byte(i + static_cast<std::size_t>(k));
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Word characters: ASCII alphanumerics plus non-ASCII letters outside the
// common punctuation/symbol blocks.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp == 0xFFFD) return false;
  if (cp >= 0x80 && cp <= 0xBF) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  return true;
}

// Case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace detail

/// Lowercases, splits on non-alphanumeric characters, drops tokens shorter
/// than two code points and stopwords.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t current_len = 0;
  auto flush = [&] {
    if (current_len >= 2 && !detail::stopwords().contains(current)) tokens.push_back(current);
    current.clear();
    current_len = 0;
  };
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = detail::next_code_point(text, i);
    if (detail::is_word_char(cp)) {
      detail::append_utf8(current, detail::to_lower(cp));
      ++current_len;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

inline Document make_document(std::string doc_id, std::string raw_text) {
  auto tokens = tokenize(raw_text);
  return Document{std::move(doc_id), std::move(raw_text), std::move(tokens)};
}

inline Query make_query(std::string query_id, std::string raw_text) {
  auto tokens = tokenize(raw_text);
  return Query{std::move(query_id), std::move(raw_text), std::move(tokens)};
}

/// Term -> count for one token sequence.
using TermCounts = std::unordered_map<std::string, std::uint32_t>;

inline TermCounts count_terms(std::span<const std::string> tokens) {
  TermCounts counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

struct Posting {
  std::uint32_t doc;  // position in the corpus
  std::uint32_t tf;
};

/// Immutable term statistics over a document collection. Documents are
/// addressed by their position in the collection; Corpus maps ids to
/// positions.
class InvertedIndex {
 public:
  InvertedIndex() = default;

  static InvertedIndex build(std::span<const Document> docs) {
    InvertedIndex index;
    index.doc_length_.reserve(docs.size());
    std::uint64_t total = 0;
    for (std::uint32_t d = 0; d < docs.size(); ++d) {
      index.doc_length_.push_back(static_cast<std::uint32_t>(docs[d].length()));
      total += docs[d].length();
      std::map<std::string_view, std::uint32_t> counts;
      for (const auto& t : docs[d].tokens) ++counts[t];
      for (const auto& [term, tf] : counts) index.postings_[std::string(term)].push_back({d, tf});
    }
    index.avg_doc_length_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    return index;
  }

  std::size_t corpus_size() const { return doc_length_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  std::uint32_t doc_length(std::size_t doc) const { return doc_length_.at(doc); }
  std::span<const std::uint32_t> doc_lengths() const { return doc_length_; }

  std::uint32_t doc_freq(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : static_cast<std::uint32_t>(it->second.size());
  }

  std::span<const Posting> postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
  }

  std::size_t num_terms() const { return postings_.size(); }

  /// Terms in lexicographic order.
  std::vector<std::string> terms() const {
    std::vector<std::string> out;
    out.reserve(postings_.size());
    for (const auto& [t, _] : postings_) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
  }

  void write(io::BinaryWriter& w) const {
    w.put<std::uint64_t>(doc_length_.size());
    for (auto len : doc_length_) w.put(len);
    w.put(avg_doc_length_);
    auto sorted = terms();
    w.put<std::uint64_t>(sorted.size());
    for (const auto& t : sorted) {
      const auto& plist = postings_.at(t);
      w.put_string(t);
      w.put<std::uint64_t>(plist.size());
      for (const auto& p : plist) {
        w.put(p.doc);
        w.put(p.tf);
      }
    }
  }

  static InvertedIndex read(io::BinaryReader& r) {
    InvertedIndex index;
    auto n = r.get<std::uint64_t>();
    index.doc_length_.resize(n);
    for (auto& len : index.doc_length_) len = r.get<std::uint32_t>();
    index.avg_doc_length_ = r.get<double>();
    auto terms = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < terms; ++i) {
      auto term = r.get_string();
      auto count = r.get<std::uint64_t>();
      std::vector<Posting> plist(count);
      for (auto& p : plist) {
        p.doc = r.get<std::uint32_t>();
        p.tf = r.get<std::uint32_t>();
        if (p.doc >= n) throw Error("index corrupt: posting for document " + std::to_string(p.doc));
      }
      index.postings_.emplace(std::move(term), std::move(plist));
    }
    return index;
  }

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_length_;
  double avg_doc_length_ = 0.0;
};

/// Documents plus their inverted index.
class Corpus {
 public:
  static constexpr std::string_view kMagic = "CFIRIDX\n";
  static constexpr std::uint32_t kFormatVersion = 1;

  Corpus() = default;

  /// Throws Error naming the first duplicate id.
  static Corpus build(std::vector<Document> docs) {
    Corpus corpus;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!corpus.by_id_.emplace(docs[i].doc_id, i).second) {
        throw Error("duplicate doc_id: " + docs[i].doc_id);
      }
    }
    corpus.index_ = InvertedIndex::build(docs);
    corpus.docs_ = std::move(docs);
    return corpus;
  }

  std::size_t size() const { return docs_.size(); }
  const std::vector<Document>& documents() const { return docs_; }
  const Document& document(std::size_t pos) const { return docs_.at(pos); }
  const InvertedIndex& index() const { return index_; }

  std::optional<std::size_t> find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t position(std::string_view doc_id) const {
    auto pos = find(doc_id);
    if (!pos) throw Error("unknown doc_id: " + std::string(doc_id));
    return *pos;
  }

  const Document& at(std::string_view doc_id) const { return docs_[position(doc_id)]; }

  void write(std::ostream& out) const {
    io::BinaryWriter w(out);
    w.put_bytes(kMagic);
    w.put(kFormatVersion);
    w.put<std::uint64_t>(docs_.size());
    for (const auto& d : docs_) {
      w.put_string(d.doc_id);
      w.put_string(d.raw_text);
      w.put<std::uint64_t>(d.tokens.size());
      for (const auto& t : d.tokens) w.put_string(t);
    }
    index_.write(w);
  }

  static Corpus read(std::istream& in) {
    io::BinaryReader r(in);
    if (r.get_bytes(kMagic.size()) != kMagic) throw Error("not a cfir index file");
    auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw Error("unsupported index format version " + std::to_string(version));
    }
    Corpus corpus;
    auto n = r.get<std::uint64_t>();
    corpus.docs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& d = corpus.docs_[i];
      d.doc_id = r.get_string();
      d.raw_text = r.get_string();
      d.tokens.resize(r.get<std::uint64_t>());
      for (auto& t : d.tokens) t = r.get_string();
      if (!corpus.by_id_.emplace(d.doc_id, i).second) throw Error("index corrupt: duplicate doc_id " + d.doc_id);
    }
    corpus.index_ = InvertedIndex::read(r);
    if (corpus.index_.corpus_size() != n) throw Error("index corrupt: document count mismatch");
    return corpus;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write(out);
    if (!out) throw Error("write failed: " + path.string());
  }

  static Corpus load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read(in);
  }

  static bool is_index_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string head(kMagic.size(), '\0');
    return in.read(head.data(), static_cast<std::streamsize>(head.size())) && head == kMagic;
  }

 private:
  std::vector<Document> docs_;
  InvertedIndex index_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads JSON-lines with required string keys "id" and "text".
inline std::vector<Document> read_corpus_jsonl(std::istream& in, const std::string& name = "<corpus>") {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(name, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(name, lineno, "expected a JSON object");
    for (const char* key : {"id", "text"}) {
      if (!obj.contains(key)) throw ParseError(name, lineno, std::string("missing key \"") + key + "\"");
      if (!obj[key].is_string()) throw ParseError(name, lineno, std::string("key \"") + key + "\" is not a string");
    }
    docs.push_back(make_document(obj["id"].get<std::string>(), obj["text"].get<std::string>()));
  }
  return docs;
}

inline std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_corpus_jsonl(in, path.string());
}

/// Reads `query_id<TAB>query_text` lines.
inline std::vector<Query> read_queries_tsv(std::istream& in, const std::string& name = "<queries>") {
  std::vector<Query> queries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(name, lineno, "expected query_id<TAB>query_text");
    if (tab == 0) throw ParseError(name, lineno, "empty query_id");
    if (line.find('\t', tab + 1) != std::string::npos) throw ParseError(name, lineno, "more than one TAB");
    auto q = make_query(line.substr(0, tab), line.substr(tab + 1));
    if (q.tokens.empty()) throw ParseError(name, lineno, "query \"" + q.query_id + "\" has no indexable tokens");
    queries.push_back(std::move(q));
  }
  return queries;
}

inline std::vector<Query> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_queries_tsv(in, path.string());
}

/// Loads either a JSON-lines corpus or a previously saved index file.
inline Corpus open_corpus(const std::filesystem::path& path) {
  if (Corpus::is_index_file(path)) return Corpus::load(path);
  return Corpus::build(load_corpus(path));
}

}  // namespace cfir
