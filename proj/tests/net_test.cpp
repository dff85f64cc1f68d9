// Copyright 2026 The Brickstore Authors
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

#include <gtest/gtest.h>

#include <thread>

#include "brickstore/error.hpp"
#include "brickstore/net.hpp"
#include "brickstore/recorder.hpp"
#include "support.hpp"

namespace brickstore {
namespace {

using namespace std::chrono_literals;
using testing::TempDir;
using testing::VectorSource;
using Clock = std::chrono::steady_clock;

constexpr uint64_t kSec = 1'000'000'000ULL;

// Ten seconds of /a and /b at 1 Hz, 1 KB payloads.
std::vector<Message> small_log() {
  std::vector<Message> log;
  for (uint64_t s = 1; s <= 10; ++s) {
    log.push_back(Message{s * kSec, "/a", Bytes(1024, static_cast<uint8_t>(s))});
    log.push_back(Message{s * kSec, "/b", Bytes(1024, static_cast<uint8_t>(100 + s))});
  }
  return log;
}

// Server bookkeeping happens after the reply is on the wire.
template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = 2s) {
  const auto deadline = Clock::now() + limit;
  while (!pred()) {
    if (Clock::now() > deadline) {
      return false;
    }
    std::this_thread::sleep_for(1ms);
  }
  return true;
}

class NetTest : public ::testing::Test {
 protected:
  void SetUp() override {
    log_ = small_log();
    VectorSource src(log_);
    record(src, dir_ / "c");
  }

  std::unique_ptr<Server> start(ServerOptions opts = {}) {
    auto server = std::make_unique<Server>(dir_ / "c", opts);
    server->start();
    return server;
  }

  TempDir dir_{"net"};
  std::vector<Message> log_;
};

TEST(EndpointTest, Parse) {
  EXPECT_EQ(Endpoint::parse("localhost:8080"), (Endpoint{"localhost", 8080}));
  EXPECT_EQ(Endpoint::parse(":9"), (Endpoint{"127.0.0.1", 9}));
  EXPECT_EQ(Endpoint::parse("10.0.0.1:0").to_string(), "10.0.0.1:0");
  EXPECT_THROW(Endpoint::parse("nohost"), Error);
  EXPECT_THROW(Endpoint::parse("h:70000"), Error);
  EXPECT_THROW(Endpoint::parse("h:12x"), Error);
}

TEST(TokenBucketTest, UnlimitedNeverWaits) {
  TokenBucket bucket;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    bucket.acquire(1 << 20);
  }
  EXPECT_LT(Clock::now() - t0, 100ms);
}

TEST(TokenBucketTest, HoldsConfiguredRate) {
  TokenBucket bucket(1'000'000);
  const auto t0 = Clock::now();
  for (int i = 0; i < 32; ++i) {
    bucket.acquire(16 * 1024);
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  // 512 KiB at 1 MB/s, less at most one burst.
  const double expect = (32.0 * 16 * 1024 - 16 * 1024) / 1e6;
  EXPECT_GT(secs, expect * 0.9);
  EXPECT_LT(secs, expect * 1.5 + 0.05);
}

TEST_F(NetTest, LatestHistoryAndAutoOverTcp) {
  ServerOptions opts;
  opts.assumed_bytes_per_second = 1e9;
  auto server = start(opts);
  Client client(server->endpoint());
  const auto latest = client.request("q /a 1", 2s);
  ASSERT_EQ(latest.size(), 1u);
  EXPECT_EQ(latest[0].timestamp, 10 * kSec);
  EXPECT_EQ(latest[0].payload, Bytes(1024, 10));

  const auto hist = client.request("qh /b /a 3 4.5", 2s);
  const std::vector<std::string> topics = {"/b", "/a"};
  EXPECT_EQ(hist, testing::oracle_range(log_, topics, 3 * kSec, 4 * kSec + kSec / 2));

  const auto all = client.request("qa /a /b 1", 2s);
  EXPECT_EQ(all.size(), log_.size());
  EXPECT_EQ(server->stats().connections, 1u);
  EXPECT_TRUE(eventually([&] { return server->stats().requests == 3; }));
  server->stop();
}

TEST_F(NetTest, ErrorsComeBackAsFrames) {
  auto server = start();
  Client client(server->endpoint());
  auto expect_code = [&](std::string_view cmd, ErrorCode code) {
    const auto frame = client.request_frame(cmd, 2s);
    EXPECT_EQ(frame.status, FrameStatus::kError) << cmd;
    EXPECT_EQ(frame.error_code, code) << cmd;
    EXPECT_FALSE(frame.error_text.empty());
  };
  expect_code("bogus /a 1", ErrorCode::kBadCommand);
  expect_code("q /a", ErrorCode::kBadArity);
  expect_code("q /a x", ErrorCode::kBadParam);
  expect_code("q /nope 1", ErrorCode::kUnknownTopic);
  expect_code("qh /a 5 1", ErrorCode::kInvalidRange);
  // No seed and nothing measured yet.
  expect_code("qa /a 1", ErrorCode::kNoBandwidthEstimate);
  // The connection survives errors.
  EXPECT_EQ(client.request("q /b 1", 2s).size(), 1u);
  EXPECT_TRUE(eventually([&] { return server->stats().errors == 6; }));
}

TEST_F(NetTest, ObserverSeesEveryRequest) {
  auto server = start();
  std::mutex mu;
  std::vector<ServiceRecord> seen;
  server->set_observer([&](const ServiceRecord& r) {
    std::lock_guard lock(mu);
    seen.push_back(r);
  });
  Client client(server->endpoint());
  client.request("q /a /b 100", 2s);
  client.request_frame("q /zzz 1", 2s);
  ASSERT_TRUE(eventually([&] {
    std::lock_guard lock(mu);
    return seen.size() == 2;
  }));
  std::lock_guard lock(mu);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].messages, 20u);
  EXPECT_EQ(seen[0].payload_bytes, 20u * 1024);
  EXPECT_GT(seen[0].service_time.count(), 0);
  EXPECT_EQ(seen[1].code, ErrorCode::kUnknownTopic);
}

TEST_F(NetTest, ThrottledReplyTimesOut) {
  auto server = start();
  server->throttle_link(20'000);
  Client client(server->endpoint());
  // 20 KiB of payload at 20 KB/s takes about a second.
  try {
    client.request("q /a /b 100", 200ms);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
  server->throttle_link(0);
  // A fresh connection works once the cap is lifted.
  EXPECT_EQ(request(server->endpoint(), "q /a 1", 5s).size(), 1u);
}

TEST_F(NetTest, ThrottleFeedsBandwidthEstimate) {
  ServerOptions opts;
  opts.bandwidth_sample_period = 20ms;
  auto server = start(opts);
  EXPECT_EQ(server->bandwidth().samples, 0u);
  server->throttle_link(2'000'000);
  const auto deadline = Clock::now() + 5s;
  while (server->bandwidth().samples < 5 && Clock::now() < deadline) {
    std::this_thread::sleep_for(10ms);
  }
  const auto est = server->bandwidth();
  ASSERT_GE(est.samples, 5u);
  EXPECT_NEAR(est.bytes_per_second, 2'000'000, 2'000'000 * 0.05);
}

TEST_F(NetTest, ConcurrentClients) {
  auto server = start();
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int c = 0; c < 4; ++c) {
    threads.emplace_back([&, c] {
      Client client(server->endpoint());
      for (int i = 0; i < 25; ++i) {
        const uint64_t s = 1 + (c + i) % 10;
        const auto got = client.request("qh /a " + std::to_string(s) + " " + std::to_string(s), 5s);
        if (got.size() == 1 && got[0].timestamp == s * kSec) {
          ++ok;
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  EXPECT_EQ(ok, 100);
  EXPECT_EQ(server->stats().connections, 4u);
}

TEST_F(NetTest, HandleInProcessMatchesWire) {
  auto server = start();
  Client client(server->endpoint());
  const auto wire = client.request_frame("qh /a /b 0 100", 2s);
  EXPECT_EQ(server->handle("qh /a /b 0 100"), wire);
}

TEST(NetErrorTest, ConnectRefusedIsIoError) {
  // Bind then close to find a port nobody is listening on.
  TempDir dir("net");
  VectorSource src({{1, "/a", {1}}});
  record(src, dir / "c");
  uint16_t port = 0;
  {
    Server s(dir / "c");
    s.start();
    port = s.port();
    s.stop();
  }
  try {
    Client client(Endpoint{"127.0.0.1", port}, 1s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kIoError || e.code() == ErrorCode::kTimeout);
  }
}

}  // namespace
}  // namespace brickstore
