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

#include "lanekeep/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ostream>

#include "lanekeep/geometry.hpp"

namespace lanekeep::protocol {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 8> kTypeNames{{
    {MessageType::kHello, "hello"},
    {MessageType::kConfigAck, "config_ack"},
    {MessageType::kReset, "reset"},
    {MessageType::kObs, "obs"},
    {MessageType::kStep, "step"},
    {MessageType::kResult, "result"},
    {MessageType::kError, "error"},
    {MessageType::kBye, "bye"},
}};

std::string length_prefix(std::size_t n) {
  std::string out(4, '\0');
  out[0] = static_cast<char>((n >> 24) & 0xff);
  out[1] = static_cast<char>((n >> 16) & 0xff);
  out[2] = static_cast<char>((n >> 8) & 0xff);
  out[3] = static_cast<char>(n & 0xff);
  return out;
}

std::size_t read_prefix(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return (std::size_t{u[0]} << 24) | (std::size_t{u[1]} << 16) |
         (std::size_t{u[2]} << 8) | std::size_t{u[3]};
}

std::string system_error(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

void send_all(int fd, std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n =
        ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(system_error("send failed"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

double body_double(const json& body, const char* key, double fallback) {
  if (!body.contains(key)) return fallback;
  const json& v = body.at(key);
  if (!v.is_number()) {
    throw InvalidArgument(std::string("'") + key + "' must be a number");
  }
  return v.get<double>();
}

std::int64_t body_int(const json& body, const char* key,
                      std::int64_t fallback) {
  if (!body.contains(key)) return fallback;
  const json& v = body.at(key);
  if (!v.is_number_integer()) {
    throw InvalidArgument(std::string("'") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::uint64_t body_seed(const json& body, std::uint64_t fallback) {
  if (!body.contains("seed")) return fallback;
  const json& v = body.at("seed");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw InvalidArgument("'seed' must be a non-negative integer");
}

}  // namespace

std::string_view to_string(MessageType type) {
  for (const auto& [t, name] : kTypeNames) {
    if (t == type) return name;
  }
  return "unknown";
}

std::optional<MessageType> parse_type(std::string_view name) {
  for (const auto& [t, n] : kTypeNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::string encode_payload(const Message& msg) {
  if (!msg.body.is_object()) {
    throw InvalidArgument("message body must be a JSON object");
  }
  std::string out = "{\"type\":";
  out += json(std::string(to_string(msg.type))).dump();
  out += ",\"seq\":";
  out += std::to_string(msg.seq);
  // nlohmann objects iterate in key order.
  for (auto it = msg.body.begin(); it != msg.body.end(); ++it) {
    if (it.key() == "type" || it.key() == "seq") {
      throw InvalidArgument("body may not use the reserved key '" + it.key() +
                            "'");
    }
    out += ',';
    out += json(it.key()).dump();
    out += ':';
    out += it.value().dump();
  }
  out += '}';
  return out;
}

std::string encode(const Message& msg) {
  const std::string payload = encode_payload(msg);
  if (payload.size() > kMaxPayload) {
    throw ProtocolError("payload of " + std::to_string(payload.size()) +
                            " bytes exceeds the frame cap",
                        kParseError, true);
  }
  return length_prefix(payload.size()) + payload;
}

Message decode_payload(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload.begin(), payload.end());
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what(),
                        kParseError, true);
  }
  if (!j.is_object()) {
    throw ProtocolError("message must be a JSON object", kParseError, true);
  }
  std::optional<std::uint64_t> seq;
  if (auto it = j.find("seq"); it != j.end() && it->is_number_unsigned()) {
    seq = it->get<std::uint64_t>();
  }
  if (!seq) {
    throw ProtocolError("message needs a non-negative integer 'seq'",
                        kParseError, false);
  }
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) {
    throw ProtocolError("message needs a string 'type'", kParseError, false,
                        seq);
  }
  const auto type = parse_type(type_it->get<std::string>());
  if (!type) {
    throw ProtocolError(
        "unknown message type '" + type_it->get<std::string>() + "'",
        kParseError, false, seq);
  }
  Message msg;
  msg.type = *type;
  msg.seq = *seq;
  j.erase("type");
  j.erase("seq");
  msg.body = std::move(j);
  return msg;
}

Message decode(std::string_view frame) {
  FrameDecoder decoder;
  decoder.feed(frame);
  auto payload = decoder.next_payload();
  if (!payload || decoder.buffered() != 0) {
    throw ProtocolError("expected exactly one complete frame", kParseError,
                        true);
  }
  return decode_payload(*payload);
}

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next_payload() {
  if (buffered() < 4) return std::nullopt;
  const std::size_t n = read_prefix(buffer_.data() + offset_);
  if (n == 0) {
    throw ProtocolError("zero-length frame", kParseError, true);
  }
  if (n > kMaxPayload) {
    throw ProtocolError("frame length " + std::to_string(n) +
                            " exceeds the cap",
                        kParseError, true);
  }
  if (buffered() < 4 + n) return std::nullopt;
  std::string payload = buffer_.substr(offset_ + 4, n);
  offset_ += 4 + n;
  if (offset_ > 65536 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return payload;
}

Message make_error(std::uint64_t seq, const std::string& code,
                   const std::string& message) {
  return {MessageType::kError, seq, json{{"code", code}, {"message", message}}};
}

json observation_json(const Observation& obs) {
  const auto v = obs.vector();
  return json(std::vector<double>(v.begin(), v.end()));
}

Observation observation_from_json(const json& j) {
  if (!j.is_array() || j.size() != kObservationDim) {
    throw InvalidArgument("observation must be an array of " +
                          std::to_string(kObservationDim) + " numbers");
  }
  Observation obs;
  for (std::size_t i = 0; i < obs.sigma.size(); ++i) {
    obs.sigma[i] = j.at(i).get<double>();
  }
  for (std::size_t i = 0; i < obs.eta.size(); ++i) {
    obs.eta[i] = j.at(obs.sigma.size() + i).get<double>();
  }
  return obs;
}

Session::Session(SessionDefaults defaults)
    : defaults_(std::move(defaults)),
      track_name_(defaults_.track),
      config_(defaults_.env) {}

json Session::config_body() const {
  return json{{"track", track_name_},
              {"dt", config_.dt},
              {"max_steps", config_.max_steps},
              {"noise_sigma", config_.noise_sigma},
              {"lambda", config_.lambda},
              {"speed", config_.speed},
              {"seed", config_.seed},
              {"heading_lookahead", config_.heading_lookahead},
              {"curvature_threshold", config_.curvature_threshold},
              {"half_width", env_->track().half_width()},
              {"obs_dim", kObservationDim}};
}

Message Session::handle(const Message& req) {
  if (phase_ == Phase::kClosed) {
    return make_error(req.seq, kBadPhase, "session is closed");
  }
  switch (req.type) {
    case MessageType::kHello:
      return on_hello(req);
    case MessageType::kReset:
      return on_reset(req);
    case MessageType::kStep:
      return on_step(req);
    case MessageType::kBye:
      phase_ = Phase::kClosed;
      return {MessageType::kBye, req.seq, json::object()};
    default:
      return make_error(req.seq, kBadPhase,
                        "'" + std::string(to_string(req.type)) +
                            "' is a server reply, not a request");
  }
}

Message Session::on_hello(const Message& req) {
  if (phase_ == Phase::kInEpisode) {
    return make_error(req.seq, kBadPhase, "hello during an episode");
  }
  const json& b = req.body;
  try {
    std::string name = defaults_.track;
    if (b.contains("track")) {
      if (!b.at("track").is_string()) {
        throw InvalidArgument("'track' must be a string");
      }
      name = b.at("track").get<std::string>();
    }
    EnvConfig cfg = defaults_.env;
    cfg.dt = body_double(b, "dt", cfg.dt);
    cfg.max_steps = static_cast<int>(body_int(b, "max_steps", cfg.max_steps));
    cfg.noise_sigma = body_double(b, "noise_sigma", cfg.noise_sigma);
    cfg.lambda = body_double(b, "lambda", cfg.lambda);
    cfg.speed = body_double(b, "speed", cfg.speed);
    cfg.seed = body_seed(b, cfg.seed);
    cfg.heading_lookahead =
        body_double(b, "heading_lookahead", cfg.heading_lookahead);
    cfg.curvature_threshold =
        body_double(b, "curvature_threshold", cfg.curvature_threshold);
    cfg.validate();
    Track track = builtin_track(name);
    env_.emplace(std::move(track), defaults_.params);
    track_name_ = name;
    config_ = cfg;
  } catch (const Error& e) {
    return make_error(req.seq, kParseError, e.what());
  }
  phase_ = Phase::kIdle;
  return {MessageType::kConfigAck, req.seq, config_body()};
}

Message Session::on_reset(const Message& req) {
  if (phase_ == Phase::kAwaitingHello) {
    return make_error(req.seq, kBadPhase, "reset before hello");
  }
  try {
    config_.seed = body_seed(req.body, config_.seed);
  } catch (const Error& e) {
    return make_error(req.seq, kParseError, e.what());
  }
  const Observation obs = env_->reset(config_);
  phase_ = Phase::kInEpisode;
  ++stats_.episodes;
  return {MessageType::kObs, req.seq, json{{"obs", observation_json(obs)}}};
}

Message Session::on_step(const Message& req) {
  if (phase_ != Phase::kInEpisode) {
    return make_error(req.seq, kBadPhase, "step outside an episode");
  }
  if (env_->done()) {
    return make_error(req.seq, kEpisodeDone,
                      "episode finished; send reset to start another");
  }
  const auto it = req.body.find("action");
  const json* a = nullptr;
  if (it != req.body.end()) {
    if (it->is_number()) {
      a = &*it;
    } else if (it->is_array() && it->size() == 1 && it->at(0).is_number()) {
      a = &it->at(0);
    }
  }
  if (a == nullptr) {
    return make_error(req.seq, kParseError,
                      "'action' must be a number or a one-element array");
  }
  const double action = a->get<double>();
  if (!std::isfinite(action) || std::abs(action) > 1.0) {
    return make_error(req.seq, kActionRange, "action must lie in [-1, 1]");
  }
  const StepResult r = env_->step(action);
  ++stats_.steps;
  json info{{"step", r.info.step},
            {"s_progress", r.info.s_progress},
            {"d", r.info.d},
            {"theta", r.info.theta},
            {"raw_action", r.info.raw_action}};
  return {MessageType::kResult, req.seq,
          json{{"obs", observation_json(r.obs)},
               {"reward", r.reward},
               {"done", r.done},
               {"info", std::move(info)}}};
}

Server::Server(ServerOptions options) : options_(std::move(options)) {
  if (!(options_.idle_timeout_s > 0.0)) {
    throw InvalidArgument("idle timeout must be positive");
  }
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::uint16_t Server::bind() {
  if (listen_fd_ >= 0) return port_;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(system_error("socket failed"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) !=
      1) {
    ::close(fd);
    throw InvalidArgument("bad bind address '" + options_.bind_address + "'");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 4) != 0) {
    const std::string msg = system_error(
        "cannot listen on " + options_.bind_address + ":" +
        std::to_string(options_.port));
    ::close(fd);
    throw Error(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  listen_fd_ = fd;
  port_ = ntohs(addr.sin_port);
  return port_;
}

void Server::serve(int max_sessions, std::ostream* log) {
  bind();
  while (!stop_.load() && (max_sessions < 0 || sessions_ < max_sessions)) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready < 0 && errno != EINTR) throw Error(system_error("poll failed"));
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    run_session(fd, log);
    ::close(fd);
    ++sessions_;
  }
}

void Server::run_session(int fd, std::ostream* log) {
  using Clock = std::chrono::steady_clock;
  Session session(options_.defaults);
  FrameDecoder decoder;
  std::string reason = "client disconnected";
  auto last_activity = Clock::now();
  std::array<char, 8192> buf{};
  try {
    while (!session.closed()) {
      if (stop_.load()) {
        reason = "server stopping";
        break;
      }
      pollfd p{fd, POLLIN, 0};
      const int ready = ::poll(&p, 1, 100);
      if (ready < 0 && errno != EINTR) {
        reason = system_error("poll failed");
        break;
      }
      if (ready <= 0) {
        const double idle =
            std::chrono::duration<double>(Clock::now() - last_activity)
                .count();
        if (idle > options_.idle_timeout_s) {
          reason = "idle timeout";
          break;
        }
        continue;
      }
      const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      last_activity = Clock::now();
      decoder.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
      while (!session.closed()) {
        std::optional<std::string> payload;
        std::optional<Message> reply;
        try {
          payload = decoder.next_payload();
          if (!payload) break;
          reply = session.handle(decode_payload(*payload));
        } catch (const ProtocolError& e) {
          send_all(fd, encode(make_error(e.seq().value_or(0), e.code(),
                                         e.what())));
          if (e.fatal()) {
            reason = std::string("protocol error: ") + e.what();
            session.close();
          }
          continue;
        }
        send_all(fd, encode(*reply));
        if (session.closed()) reason = "bye";
      }
    }
  } catch (const std::exception& e) {
    reason = e.what();
  }
  if (log != nullptr) {
    *log << "session ended (" << reason
         << "): episodes=" << session.stats().episodes
         << " steps=" << session.stats().steps << '\n'
         << std::flush;
  }
}

Client::~Client() { close(); }

void Client::connect(const std::string& host, std::uint16_t port) {
  close();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints,
                    &res) != 0 ||
      res == nullptr) {
    throw Error("cannot resolve '" + host + "'");
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw Error(system_error("socket failed"));
  }
  if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string msg = system_error("connect to " + host + ":" +
                                         std::to_string(port) + " failed");
    ::freeaddrinfo(res);
    ::close(fd);
    throw Error(msg);
  }
  ::freeaddrinfo(res);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  fd_ = fd;
  next_seq_ = 1;
  decoder_ = FrameDecoder{};
}

Message Client::request(MessageType type, json body) {
  const std::uint64_t seq = next_seq_++;
  send_raw(encode(Message{type, seq, std::move(body)}));
  auto reply = receive();
  if (!reply) throw Error("connection closed before the reply arrived");
  if (reply->seq != seq) {
    throw Error("reply seq " + std::to_string(reply->seq) +
                " does not match request " + std::to_string(seq));
  }
  return *reply;
}

void Client::send_raw(std::string_view bytes) {
  if (fd_ < 0) throw LifecycleError("client is not connected");
  send_all(fd_, bytes);
}

std::optional<Message> Client::receive(double timeout_s) {
  if (fd_ < 0) throw LifecycleError("client is not connected");
  using Clock = std::chrono::steady_clock;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(timeout_s));
  std::array<char, 8192> buf{};
  while (true) {
    if (auto payload = decoder_.next_payload()) return decode_payload(*payload);
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) throw Error("timed out waiting for a reply");
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno != EINTR) throw Error(system_error("poll failed"));
    if (ready <= 0) continue;
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    decoder_.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
  }
}

void Client::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace lanekeep::protocol
