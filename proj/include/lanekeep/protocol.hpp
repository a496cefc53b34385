// Copyright 2026 The lanekeep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "lanekeep/env.hpp"

namespace lanekeep::protocol {

/// Frames are a 4-byte big-endian payload length followed by UTF-8 JSON.
inline constexpr std::size_t kMaxPayload = std::size_t{1} << 20;

enum class MessageType {
  kHello,
  kConfigAck,
  kReset,
  kObs,
  kStep,
  kResult,
  kError,
  kBye
};

std::string_view to_string(MessageType type);
std::optional<MessageType> parse_type(std::string_view name);

struct Message {
  MessageType type = MessageType::kHello;
  std::uint64_t seq = 0;
  nlohmann::json body = nlohmann::json::object();

  bool operator==(const Message& other) const {
    return type == other.type && seq == other.seq && body == other.body;
  }
};

// Error codes carried in error replies.
inline constexpr const char* kEpisodeDone = "episode_done";
inline constexpr const char* kBadPhase = "bad_phase";
inline constexpr const char* kParseError = "parse_error";
inline constexpr const char* kActionRange = "action_range";

/// Raised while decoding. Fatal errors end the connection; the others are
/// answered with an error reply and the session continues.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string code, bool fatal,
                std::optional<std::uint64_t> seq = std::nullopt)
      : Error(what), code_(std::move(code)), fatal_(fatal), seq_(seq) {}
  const std::string& code() const { return code_; }
  bool fatal() const { return fatal_; }
  std::optional<std::uint64_t> seq() const { return seq_; }

 private:
  std::string code_;
  bool fatal_;
  std::optional<std::uint64_t> seq_;
};

/// Canonical JSON: type, seq, then body keys in alphabetical order, no
/// whitespace, shortest round-trip floats.
std::string encode_payload(const Message& msg);
/// Length-prefixed frame. Throws ProtocolError for oversize payloads.
std::string encode(const Message& msg);

Message decode_payload(std::string_view payload);
/// Decodes exactly one complete frame.
Message decode(std::string_view frame);

/// Streaming frame splitter. Partial frames stay buffered until complete.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Next complete payload, if any. Throws a fatal ProtocolError for a zero
  /// or oversize length prefix.
  std::optional<std::string> next_payload();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

Message make_error(std::uint64_t seq, const std::string& code,
                   const std::string& message);

struct SessionDefaults {
  std::string track = "oval";
  EnvConfig env;
  VehicleParams params;
};

/// Request/reply state machine for one client connection. Transport-free so
/// it can be driven directly in tests.
class Session {
 public:
  enum class Phase { kAwaitingHello, kIdle, kInEpisode, kClosed };
  struct Stats {
    int episodes = 0;
    std::int64_t steps = 0;
  };

  explicit Session(SessionDefaults defaults = {});

  Message handle(const Message& request);
  Phase phase() const { return phase_; }
  bool closed() const { return phase_ == Phase::kClosed; }
  const Stats& stats() const { return stats_; }
  void close() { phase_ = Phase::kClosed; }

 private:
  Message on_hello(const Message& req);
  Message on_reset(const Message& req);
  Message on_step(const Message& req);
  nlohmann::json config_body() const;

  SessionDefaults defaults_;
  Phase phase_ = Phase::kAwaitingHello;
  std::string track_name_;
  EnvConfig config_;
  std::optional<LaneKeepEnv> env_;
  Stats stats_;
};

nlohmann::json observation_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& j);

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  double idle_timeout_s = 30.0;
  SessionDefaults defaults;
};

/// Single-client TCP server. Sessions run one at a time on the serving
/// thread; stop() may be called from any thread.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; returns the bound port.
  std::uint16_t bind();
  std::uint16_t port() const { return port_; }

  /// Accepts and serves sessions until stop() or until max_sessions have
  /// ended (negative = unlimited).
  void serve(int max_sessions = -1, std::ostream* log = nullptr);
  void stop() { stop_.store(true); }
  int sessions_served() const { return sessions_; }

 private:
  void run_session(int fd, std::ostream* log);

  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  int sessions_ = 0;
};

/// Blocking client used by scripted agents and tests.
class Client {
 public:
  Client() = default;
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void connect(const std::string& host, std::uint16_t port);
  /// Sends `type`/`body` with the next sequence number and waits for the
  /// reply.
  Message request(MessageType type,
                  nlohmann::json body = nlohmann::json::object());
  void send_raw(std::string_view bytes);
  /// Next reply, or nullopt once the server closed the connection.
  std::optional<Message> receive(double timeout_s = 10.0);
  void close();
  bool connected() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::uint64_t next_seq_ = 1;
  FrameDecoder decoder_;
};

}  // namespace lanekeep::protocol
