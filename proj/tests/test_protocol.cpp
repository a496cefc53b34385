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

#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "lanekeep/protocol.hpp"
#include "support.hpp"

namespace lanekeep::protocol {
namespace {

using nlohmann::json;
using testing::Gen;

std::string hex_prefix(const std::string& frame) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02x %02x %02x %02x",
                static_cast<unsigned char>(frame[0]),
                static_cast<unsigned char>(frame[1]),
                static_cast<unsigned char>(frame[2]),
                static_cast<unsigned char>(frame[3]));
  return buf;
}

TEST(Encode, StepGoldenBytes) {
  const Message m{MessageType::kStep, 1, json{{"action", {0.0}}}};
  const std::string frame = encode(m);
  EXPECT_EQ(frame.substr(4), R"({"type":"step","seq":1,"action":[0.0]})");
  EXPECT_EQ(frame.size(), 4u + 38u);
  EXPECT_EQ(hex_prefix(frame), "00 00 00 26");
}

TEST(Encode, ByeGoldenBytes) {
  const std::string frame = encode({MessageType::kBye, 2, json::object()});
  EXPECT_EQ(frame.substr(4), R"({"type":"bye","seq":2})");
  EXPECT_EQ(frame.size(), 4u + 22u);
  EXPECT_EQ(hex_prefix(frame), "00 00 00 16");
}

TEST(Encode, BodyKeysSortedAndCompact) {
  const Message m{MessageType::kResult, 9,
                  json{{"reward", 0.5}, {"done", false}, {"obs", {1.0, -2.5}},
                       {"info", {{"z", 1}, {"a", 2}}}}};
  EXPECT_EQ(encode_payload(m),
            R"({"type":"result","seq":9,"done":false,"info":{"a":2,"z":1},)"
            R"("obs":[1.0,-2.5],"reward":0.5})");
}

TEST(Encode, ShortestRoundTripFloats) {
  const Message m{MessageType::kStep, 3, json{{"action", {0.1}}}};
  EXPECT_EQ(encode_payload(m), R"({"type":"step","seq":3,"action":[0.1]})");
}

TEST(Encode, RejectsReservedBodyKeysAndOversize) {
  EXPECT_THROW(encode({MessageType::kBye, 1, json{{"seq", 1}}}),
               InvalidArgument);
  EXPECT_THROW(encode({MessageType::kBye, 1, json::array()}), InvalidArgument);
  const std::string big(kMaxPayload, 'x');
  EXPECT_THROW(encode({MessageType::kHello, 1, json{{"pad", big}}}),
               ProtocolError);
}

json random_value(Gen& g, int depth) {
  switch (g.integer(0, depth > 2 ? 3 : 5)) {
    case 0:
      return g.uniform(-1e6, 1e6) * std::pow(10.0, g.integer(-12, 12));
    case 1:
      return g.integer(-1000000, 1000000);
    case 2:
      return g.coin();
    case 3: {
      std::string s;
      const int n = g.integer(0, 12);
      for (int i = 0; i < n; ++i) s += static_cast<char>(g.integer(32, 126));
      return s;
    }
    case 4: {
      json a = json::array();
      const int n = g.integer(0, 5);
      for (int i = 0; i < n; ++i) a.push_back(random_value(g, depth + 1));
      return a;
    }
    default: {
      json o = json::object();
      const int n = g.integer(0, 4);
      for (int i = 0; i < n; ++i) {
        o["k" + std::to_string(g.integer(0, 99))] = random_value(g, depth + 1);
      }
      return o;
    }
  }
}

TEST(Decode, RoundTripProperty) {
  Gen g(41);
  for (int i = 0; i < 2000; ++i) {
    Message m;
    m.type = static_cast<MessageType>(g.integer(0, 7));
    m.seq = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
    const int n = g.integer(0, 5);
    for (int k = 0; k < n; ++k) {
      m.body["f" + std::to_string(g.integer(0, 50))] = random_value(g, 0);
    }
    const std::string frame = encode(m);
    const Message back = decode(frame);
    ASSERT_EQ(back, m) << frame.substr(4);
    // Canonical: re-encoding is byte-identical.
    ASSERT_EQ(encode(back), frame);
  }
}

TEST(Decode, DoublesSurviveBitExactly) {
  Gen g(42);
  for (int i = 0; i < 5000; ++i) {
    const double x = g.normal() * std::pow(10.0, g.integer(-300, 300));
    const Message back = decode(encode({MessageType::kObs, 1, json{{"x", x}}}));
    ASSERT_EQ(back.body["x"].get<double>(), x);
  }
}

TEST(FrameDecoder, WaitsForTruncatedFrames) {
  const std::string a = encode({MessageType::kReset, 1, json::object()});
  const std::string b = encode({MessageType::kStep, 2, json{{"action", 0.5}}});
  const std::string stream = a + b;
  FrameDecoder d;
  std::vector<Message> got;
  for (char c : stream) {
    d.feed(std::string_view(&c, 1));
    while (auto p = d.next_payload()) got.push_back(decode_payload(*p));
  }
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].type, MessageType::kReset);
  EXPECT_EQ(got[1].seq, 2u);
  EXPECT_EQ(d.buffered(), 0u);

  FrameDecoder partial;
  partial.feed(std::string_view(b).substr(0, 10));
  EXPECT_FALSE(partial.next_payload().has_value());
  partial.feed(std::string_view(b).substr(10));
  EXPECT_TRUE(partial.next_payload().has_value());
}

TEST(FrameDecoder, ZeroAndOversizeLengthsAreFatal) {
  FrameDecoder zero;
  zero.feed(std::string("\0\0\0\0", 4));
  try {
    zero.next_payload();
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_TRUE(e.fatal());
  }
  FrameDecoder big;
  big.feed(std::string("\x00\x10\x00\x01", 4));
  EXPECT_THROW(big.next_payload(), ProtocolError);
  // Exactly at the cap is only a pending frame.
  FrameDecoder cap;
  cap.feed(std::string("\x00\x10\x00\x00", 4));
  EXPECT_FALSE(cap.next_payload().has_value());
}

TEST(Decode, MalformedJsonIsFatal) {
  try {
    decode_payload("{\"type\":");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_TRUE(e.fatal());
    EXPECT_EQ(e.code(), kParseError);
  }
  EXPECT_THROW(decode_payload("[1,2]"), ProtocolError);
}

TEST(Decode, UnknownTypeKeepsConnection) {
  try {
    decode_payload(R"({"type":"teleport","seq":5})");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_FALSE(e.fatal());
    EXPECT_EQ(e.seq(), 5u);
    EXPECT_EQ(e.code(), kParseError);
  }
  try {
    decode_payload(R"({"type":"step"})");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_FALSE(e.fatal());
  }
}

Message req(MessageType t, std::uint64_t seq, json body = json::object()) {
  return {t, seq, std::move(body)};
}

TEST(Session, HelloAcknowledgesConfig) {
  Session s;
  EXPECT_EQ(s.phase(), Session::Phase::kAwaitingHello);
  const Message ack = s.handle(req(MessageType::kHello, 1));
  EXPECT_EQ(ack.type, MessageType::kConfigAck);
  EXPECT_EQ(ack.seq, 1u);
  EXPECT_EQ(ack.body["dt"], 0.05);
  EXPECT_EQ(ack.body["max_steps"], 6500);
  EXPECT_EQ(ack.body["track"], "oval");
  EXPECT_EQ(ack.body["obs_dim"], 7);
  EXPECT_EQ(s.phase(), Session::Phase::kIdle);
}

TEST(Session, HelloOverridesAndRejectsBadConfig) {
  Session s;
  const Message bad = s.handle(req(MessageType::kHello, 1, {{"dt", -1.0}}));
  EXPECT_EQ(bad.type, MessageType::kError);
  EXPECT_EQ(bad.body["code"], kParseError);
  EXPECT_EQ(s.phase(), Session::Phase::kAwaitingHello);
  const Message unknown =
      s.handle(req(MessageType::kHello, 2, {{"track", "nowhere"}}));
  EXPECT_EQ(unknown.type, MessageType::kError);
  const Message ack = s.handle(req(
      MessageType::kHello, 3,
      {{"track", "river"}, {"noise_sigma", 0.0}, {"max_steps", 5}, {"seed", 9}}));
  EXPECT_EQ(ack.type, MessageType::kConfigAck);
  EXPECT_EQ(ack.body["track"], "river");
  EXPECT_EQ(ack.body["max_steps"], 5);
  EXPECT_EQ(ack.body["seed"], 9);
}

TEST(Session, LifecycleErrors) {
  Session s;
  EXPECT_EQ(s.handle(req(MessageType::kReset, 1)).body["code"], kBadPhase);
  EXPECT_EQ(s.handle(req(MessageType::kStep, 2, {{"action", 0.0}})).body["code"],
            kBadPhase);
  s.handle(req(MessageType::kHello, 3, {{"max_steps", 2}, {"noise_sigma", 0.0}}));
  EXPECT_EQ(s.handle(req(MessageType::kStep, 4, {{"action", 0.0}})).body["code"],
            kBadPhase);
  EXPECT_EQ(s.handle(req(MessageType::kObs, 5)).body["code"], kBadPhase);
  EXPECT_EQ(s.handle(req(MessageType::kReset, 6)).type, MessageType::kObs);
  EXPECT_EQ(s.handle(req(MessageType::kStep, 7, {{"action", 1.5}})).body["code"],
            kActionRange);
  EXPECT_EQ(s.handle(req(MessageType::kStep, 8, {{"action", "left"}})).body["code"],
            kParseError);
  EXPECT_EQ(s.handle(req(MessageType::kHello, 9)).body["code"], kBadPhase);
  const Message r1 = s.handle(req(MessageType::kStep, 10, {{"action", {0.0}}}));
  EXPECT_FALSE(r1.body["done"].get<bool>());
  const Message r2 = s.handle(req(MessageType::kStep, 11, {{"action", 0.0}}));
  EXPECT_TRUE(r2.body["done"].get<bool>());
  const Message after = s.handle(req(MessageType::kStep, 12, {{"action", 0.0}}));
  EXPECT_EQ(after.type, MessageType::kError);
  EXPECT_EQ(after.body["code"], kEpisodeDone);
  EXPECT_EQ(after.seq, 12u);
  EXPECT_EQ(s.handle(req(MessageType::kReset, 13)).type, MessageType::kObs);
  EXPECT_EQ(s.stats().episodes, 2);
  EXPECT_EQ(s.stats().steps, 2);
  EXPECT_EQ(s.handle(req(MessageType::kBye, 14)).type, MessageType::kBye);
  EXPECT_TRUE(s.closed());
}

TEST(Session, MatchesInProcessEnvBitExactly) {
  Session s;
  s.handle(req(MessageType::kHello, 1, {{"seed", 3}, {"track", "loop"}}));
  const Message first = s.handle(req(MessageType::kReset, 2));
  EnvConfig cfg;
  cfg.seed = 3;
  LaneKeepEnv env(builtin_track("loop"));
  EXPECT_EQ(observation_from_json(first.body["obs"]), env.reset(cfg));
  Gen g(43);
  for (int i = 0; i < 200; ++i) {
    const double a = g.uniform(-0.02, 0.02);
    const Message r = s.handle(req(MessageType::kStep, 3 + i, {{"action", a}}));
    const StepResult want = env.step(a);
    ASSERT_EQ(observation_from_json(r.body["obs"]), want.obs);
    ASSERT_EQ(r.body["reward"].get<double>(), want.reward);
    ASSERT_EQ(r.body["done"].get<bool>(), want.done);
    ASSERT_EQ(r.body["info"]["d"].get<double>(), want.info.d);
    if (want.done) break;
  }
}

// Runs a server on a background thread for the life of the fixture.
class ServerFixture : public ::testing::Test {
 protected:
  void start(int sessions, double idle = 30.0) {
    ServerOptions o;
    o.idle_timeout_s = idle;
    server_ = std::make_unique<Server>(o);
    port_ = server_->bind();
    thread_ = std::thread([this, sessions] { server_->serve(sessions); });
  }
  void TearDown() override {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }
  std::unique_ptr<Server> server_;
  std::thread thread_;
  std::uint16_t port_ = 0;
};

TEST_F(ServerFixture, ScriptedClientZeroActionsOnOval) {
  start(1);
  Client c;
  c.connect("127.0.0.1", port_);
  const Message ack = c.request(MessageType::kHello, {{"noise_sigma", 0.0}});
  EXPECT_EQ(ack.type, MessageType::kConfigAck);
  EXPECT_EQ(c.request(MessageType::kReset).type, MessageType::kObs);
  for (int i = 0; i < 10; ++i) {
    const Message r = c.request(MessageType::kStep, {{"action", {0.0}}});
    EXPECT_EQ(r.body["reward"].get<double>(), 1.0);
  }
  EXPECT_EQ(c.request(MessageType::kBye).type, MessageType::kBye);
  EXPECT_FALSE(c.receive(2.0).has_value());
  thread_.join();
  EXPECT_EQ(server_->sessions_served(), 1);
}

TEST_F(ServerFixture, PipelinedRequestsGetOneReplyEachInOrder) {
  start(1);
  Client c;
  c.connect("127.0.0.1", port_);
  std::string burst;
  burst += encode({MessageType::kHello, 1, json::object()});
  burst += encode({MessageType::kReset, 2, json::object()});
  for (std::uint64_t k = 3; k < 20; ++k) {
    burst += encode({MessageType::kStep, k, json{{"action", 0.0}}});
  }
  burst += encode({MessageType::kStep, 20, json{{"action", 7.0}}});
  burst += encode({MessageType::kBye, 21, json::object()});
  c.send_raw(burst);
  std::vector<std::uint64_t> seqs;
  while (auto m = c.receive(5.0)) seqs.push_back(m->seq);
  ASSERT_EQ(seqs.size(), 21u);
  for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_EQ(seqs[i], i + 1);
}

TEST_F(ServerFixture, ReturnsToAcceptingAfterDisconnect) {
  start(3);
  for (int i = 0; i < 3; ++i) {
    Client c;
    c.connect("127.0.0.1", port_);
    EXPECT_EQ(c.request(MessageType::kHello).type, MessageType::kConfigAck);
    if (i == 1) c.send_raw(std::string("\0\0", 2));  // half a prefix
    c.close();
  }
  thread_.join();
  EXPECT_EQ(server_->sessions_served(), 3);
}

TEST_F(ServerFixture, MalformedJsonClosesWithError) {
  start(1);
  Client c;
  c.connect("127.0.0.1", port_);
  const std::string junk = "{not json";
  c.send_raw(std::string("\0\0\0", 3) + static_cast<char>(junk.size()) + junk);
  const auto reply = c.receive(5.0);
  ASSERT_TRUE(reply.has_value());
  EXPECT_EQ(reply->type, MessageType::kError);
  EXPECT_EQ(reply->body["code"], kParseError);
  EXPECT_FALSE(c.receive(5.0).has_value());
}

TEST_F(ServerFixture, UnknownTypeKeepsSessionOpen) {
  start(1);
  Client c;
  c.connect("127.0.0.1", port_);
  const std::string p = R"({"type":"warp","seq":1})";
  c.send_raw(std::string("\0\0\0", 3) + static_cast<char>(p.size()) + p);
  const auto reply = c.receive(5.0);
  ASSERT_TRUE(reply.has_value());
  EXPECT_EQ(reply->seq, 1u);
  EXPECT_EQ(reply->body["code"], kParseError);
  Message hello{MessageType::kHello, 2, json::object()};
  c.send_raw(encode(hello));
  EXPECT_EQ(c.receive(5.0)->type, MessageType::kConfigAck);
}

TEST_F(ServerFixture, IdleTimeoutClosesSession) {
  start(1, 0.3);
  Client c;
  c.connect("127.0.0.1", port_);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_FALSE(c.receive(5.0).has_value());
  const double waited =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  EXPECT_GE(waited, 0.25);
  EXPECT_LT(waited, 3.0);
}

TEST_F(ServerFixture, RandomByteStreamsNeverCrash) {
  const int sessions = 40;
  start(sessions, 0.5);
  Gen g(44);
  for (int i = 0; i < sessions; ++i) {
    Client c;
    c.connect("127.0.0.1", port_);
    std::string bytes;
    if (i % 2 == 0) {
      // Valid prefix, random payload.
      const int n = g.integer(1, 64);
      bytes = std::string("\0\0\0", 3) + static_cast<char>(n);
      for (int k = 0; k < n; ++k) bytes += static_cast<char>(g.integer(0, 255));
    } else {
      const int n = g.integer(1, 256);
      for (int k = 0; k < n; ++k) bytes += static_cast<char>(g.integer(0, 255));
    }
    c.send_raw(bytes);
    while (c.receive(5.0)) {
    }
  }
  thread_.join();
  EXPECT_EQ(server_->sessions_served(), sessions);
}

TEST(Server, BindFailureReported) {
  ServerOptions o;
  o.bind_address = "not-an-address";
  Server s(o);
  EXPECT_THROW(s.bind(), InvalidArgument);
  ServerOptions bad;
  bad.idle_timeout_s = 0.0;
  EXPECT_THROW(Server{bad}, InvalidArgument);
}

}  // namespace
}  // namespace lanekeep::protocol
