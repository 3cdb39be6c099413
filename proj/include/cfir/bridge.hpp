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

// Client for external scorers speaking newline-delimited JSON.
//
// The server greets with {"op":"hello","proto":1,"name":...}. Each request is
// {"id":N,"query":"...","docs":[{"doc_id":"...","text":"..."}]} and is
// answered by {"id":N,"scores":[...]} or {"id":N,"error":"..."}. One request
// is in flight per connection.
//
// Endpoints: "exec:<shell command>" runs the server as a child process over
// its stdin/stdout; "tcp:<host>:<port>" connects to a listening server.

#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfir/common.hpp"
#include "cfir/corpus.hpp"
#include "cfir/retrieval.hpp"

namespace cfir {

class BridgeError : public Error {
 public:
  enum class Kind { Connection, Timeout, Malformed, CountMismatch, Remote };

  BridgeError(Kind kind, const std::string& what) : Error(std::string(kind_name(kind)) + ": " + what), kind_(kind) {}

  Kind kind() const { return kind_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Connection: return "bridge connection error";
      case Kind::Timeout: return "bridge timeout";
      case Kind::Malformed: return "bridge malformed response";
      case Kind::CountMismatch: return "bridge score count mismatch";
      case Kind::Remote: return "bridge remote error";
    }
    return "bridge error";
  }

 private:
  Kind kind_;
};

struct BridgeEndpoint {
  enum class Transport { Exec, Tcp };

  Transport transport = Transport::Exec;
  std::string command;  // Exec
  std::string host;     // Tcp
  std::string port;     // Tcp

  static BridgeEndpoint parse(std::string_view spec) {
    BridgeEndpoint ep;
    if (spec.starts_with("exec:")) {
      ep.transport = Transport::Exec;
      ep.command = std::string(spec.substr(5));
      if (ep.command.empty()) throw ConfigError("bridge endpoint \"exec:\" needs a command");
      return ep;
    }
    if (spec.starts_with("tcp:")) {
      auto rest = spec.substr(4);
      auto colon = rest.rfind(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
        throw ConfigError("bridge endpoint must look like tcp:<host>:<port>");
      }
      ep.transport = Transport::Tcp;
      ep.host = std::string(rest.substr(0, colon));
      ep.port = std::string(rest.substr(colon + 1));
      return ep;
    }
    throw ConfigError("bridge endpoint must start with exec: or tcp:, got \"" + std::string(spec) + "\"");
  }
};

struct BridgeDoc {
  std::string doc_id;
  std::string text;
};

class BridgeClient {
 public:
  static constexpr int kProtocolVersion = 1;

  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  ~BridgeClient() { close(); }

  /// Connects and completes the hello handshake.
  static std::unique_ptr<BridgeClient> connect(const BridgeEndpoint& endpoint,
                                               std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    ::signal(SIGPIPE, SIG_IGN);
    std::unique_ptr<BridgeClient> client(new BridgeClient(timeout));
    if (endpoint.transport == BridgeEndpoint::Transport::Exec) {
      client->spawn(endpoint.command);
    } else {
      client->dial(endpoint.host, endpoint.port);
    }
    client->handshake();
    return client;
  }

  const std::string& server_name() const { return server_name_; }

  /// One request/response exchange. Scores are aligned with `docs`.
  std::vector<double> score(std::string_view query, std::span<const BridgeDoc> docs) {
    std::lock_guard lock(mutex_);
    nlohmann::json req;
    req["id"] = next_id_;
    req["query"] = std::string(query);
    req["docs"] = nlohmann::json::array();
    for (const auto& d : docs) req["docs"].push_back({{"doc_id", d.doc_id}, {"text", d.text}});
    send_line(req.dump());

    auto line = read_line();
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw BridgeError(BridgeError::Kind::Malformed, "not JSON: " + line.substr(0, 200));
    }
    if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer()) {
      throw BridgeError(BridgeError::Kind::Malformed, "response without integer id");
    }
    if (resp["id"].get<std::int64_t>() != next_id_) {
      throw BridgeError(BridgeError::Kind::Malformed, "response id " + resp["id"].dump() + " does not echo request id " +
                                                          std::to_string(next_id_));
    }
    ++next_id_;
    if (resp.contains("error")) {
      throw BridgeError(BridgeError::Kind::Remote, resp["error"].is_string() ? resp["error"].get<std::string>()
                                                                             : resp["error"].dump());
    }
    if (!resp.contains("scores") || !resp["scores"].is_array()) {
      throw BridgeError(BridgeError::Kind::Malformed, "response without scores array");
    }
    const auto& arr = resp["scores"];
    if (arr.size() != docs.size()) {
      throw BridgeError(BridgeError::Kind::CountMismatch, "sent " + std::to_string(docs.size()) +
                                                              " documents, received " + std::to_string(arr.size()) +
                                                              " scores");
    }
    std::vector<double> scores;
    scores.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number()) throw BridgeError(BridgeError::Kind::Malformed, "non-numeric score " + v.dump());
      double s = v.get<double>();
      if (!std::isfinite(s)) throw BridgeError(BridgeError::Kind::Malformed, "non-finite score");
      scores.push_back(s);
    }
    return scores;
  }

 private:
  explicit BridgeClient(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  void spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw BridgeError(BridgeError::Kind::Connection, std::string("pipe: ") + std::strerror(errno));
    }
    pid_t pid = ::fork();
    if (pid < 0) throw BridgeError(BridgeError::Kind::Connection, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    child_ = pid;
  }

  void dial(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      throw BridgeError(BridgeError::Kind::Connection, host + ":" + port + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
      throw BridgeError(BridgeError::Kind::Connection, "cannot connect to " + host + ":" + port + ": " +
                                                           std::strerror(errno));
    }
    read_fd_ = fd;
    write_fd_ = fd;
    socket_ = true;
  }

  void handshake() {
    auto line = read_line();
    nlohmann::json hello;
    try {
      hello = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw BridgeError(BridgeError::Kind::Malformed, "handshake is not JSON: " + line.substr(0, 200));
    }
    if (!hello.is_object() || hello.value("op", "") != "hello") {
      throw BridgeError(BridgeError::Kind::Malformed, "expected hello handshake, got " + line.substr(0, 200));
    }
    if (!hello.contains("proto") || hello["proto"] != kProtocolVersion) {
      throw BridgeError(BridgeError::Kind::Malformed, "unsupported protocol version " + hello.value("proto", nlohmann::json()).dump());
    }
    server_name_ = hello.value("name", "external");
  }

  void send_line(const std::string& payload) {
    std::string data = payload + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                          : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(BridgeError::Kind::Connection, std::string("write: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BridgeError(BridgeError::Kind::Timeout, "no response within " + std::to_string(timeout_.count()) + " ms");
      pollfd pfd{read_fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(BridgeError::Kind::Connection, std::string("poll: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[65536];
      ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(BridgeError::Kind::Connection, std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) throw BridgeError(BridgeError::Kind::Connection, "server closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
    if (child_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, &status, WNOHANG) == child_) {
          child_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(child_, SIGTERM);
      ::waitpid(child_, &status, 0);
      child_ = -1;
    }
  }

  std::chrono::milliseconds timeout_;
  int read_fd_ = -1;
  int write_fd_ = -1;
  bool socket_ = false;
  pid_t child_ = -1;
  std::string buffer_;
  std::string server_name_;
  std::int64_t next_id_ = 1;
  std::mutex mutex_;
};

/// Ranks `docs` by scores fetched from the bridge.
inline RankedList external_rank(BridgeClient& client, const Query& query, std::span<const Document> docs,
                                std::string model_name = "external") {
  std::vector<BridgeDoc> payload;
  payload.reserve(docs.size());
  for (const auto& d : docs) payload.push_back({d.doc_id, d.raw_text});
  auto scores = client.score(query.raw_text, payload);
  std::vector<ScoredDoc> scored;
  scored.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) scored.push_back({docs[i].doc_id, scores[i]});
  return rank_scores(query.query_id, std::move(model_name), std::move(scored), std::max<std::size_t>(1, docs.size()));
}

/// Retrieval model backed by an external scorer.
class ExternalModel final : public RetrievalModel {
 public:
  ExternalModel(const Corpus& corpus, BridgeClient& client) : corpus_(corpus), client_(client) {}

  std::string name() const override { return "external"; }
  const Corpus& corpus() const override { return corpus_; }

  double score(const Query& query, const Document& doc) const override {
    BridgeDoc d{doc.doc_id, doc.raw_text};
    return client_.score(query.raw_text, std::span<const BridgeDoc>(&d, 1)).front();
  }

  std::vector<double> score_corpus(const Query& query) const override {
    std::vector<BridgeDoc> payload;
    payload.reserve(corpus_.size());
    for (const auto& d : corpus_.documents()) payload.push_back({d.doc_id, d.raw_text});
    return client_.score(query.raw_text, payload);
  }

 private:
  const Corpus& corpus_;
  BridgeClient& client_;
};

}  // namespace cfir
