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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "brickstore/protocol.hpp"
#include "brickstore/query.hpp"

namespace brickstore {

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  // "host:port" or ":port". Throws kBadParam.
  static Endpoint parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const Endpoint&) const = default;
};

// Shared rate limiter for outbound bytes. A rate of 0 means unlimited.
class TokenBucket {
 public:
  explicit TokenBucket(double bytes_per_second = 0);

  void set_rate(double bytes_per_second);
  double rate() const;
  // Blocks until `bytes` may be sent.
  void acquire(size_t bytes);

 private:
  mutable std::mutex mu_;
  double rate_ = 0;
  double burst_ = 0;
  double tokens_ = 0;
  std::chrono::steady_clock::time_point last_{};
};

struct ServerOptions {
  Endpoint bind;
  double throttle_bytes_per_second = 0;
  std::chrono::milliseconds bandwidth_sample_period{100};
  double bandwidth_alpha = kDefaultBandwidthAlpha;
  // Seeds the estimate so auto queries work before any measurement.
  std::optional<double> assumed_bytes_per_second;
  // Unthrottled replies at least this large feed the bandwidth estimate.
  size_t measure_min_bytes = 64 * 1024;
  size_t send_chunk = 16 * 1024;
  size_t max_line = 64 * 1024;
  TimeIndexReader::Access index_access = TimeIndexReader::Access::kMmap;
};

struct ServiceRecord {
  std::string command;
  ErrorCode code = ErrorCode::kOk;
  size_t messages = 0;
  uint64_t payload_bytes = 0;
  double budget_bytes = 0;  // auto queries only
  std::chrono::nanoseconds service_time{0};  // parse + query + encode
  std::chrono::nanoseconds send_time{0};
};

struct ServerStats {
  uint64_t connections = 0;
  uint64_t requests = 0;
  uint64_t errors = 0;
};

// TCP front end for one container. One thread per connection; connections
// are persistent and carry any number of request lines.
class Server {
 public:
  Server(const std::filesystem::path& container, ServerOptions options = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  uint16_t port() const { return port_; }
  Endpoint endpoint() const;

  // Caps outbound throughput on every connection; 0 lifts the cap.
  void throttle_link(double bytes_per_second);
  double throttle() const { return bucket_.rate(); }
  BandwidthEstimate bandwidth() const { return monitor_.estimate(); }
  ServerStats stats() const;

  // Called after every request, from the connection thread.
  void set_observer(std::function<void(const ServiceRecord&)> observer);

  // Executes one request line in-process.
  ResponseFrame handle(std::string_view line, ServiceRecord* record = nullptr);

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void sampler_loop();
  void serve_connection(Connection* conn);
  void send_frame(int fd, const Bytes& frame);
  void reap(bool all);

  QueryEngine engine_;
  ServerOptions options_;
  TokenBucket bucket_;
  BandwidthMonitor monitor_;

  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread sampler_thread_;
  std::mutex sampler_mu_;
  std::condition_variable sampler_cv_;

  std::mutex conn_mu_;
  std::list<std::unique_ptr<Connection>> connections_;

  mutable std::mutex stats_mu_;
  ServerStats stats_;
  std::function<void(const ServiceRecord&)> observer_;
};

// Blocking client over one persistent connection.
class Client {
 public:
  explicit Client(const Endpoint& endpoint,
                  std::chrono::milliseconds connect_timeout = std::chrono::seconds(5));
  ~Client();

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  // Throws kTimeout, kBadFrame or kIoError.
  ResponseFrame request_frame(std::string_view command, std::chrono::milliseconds timeout);
  // As above, then rethrows error frames as Error.
  std::vector<Message> request(std::string_view command, std::chrono::milliseconds timeout);
  void close();

 private:
  void read_exact(std::span<uint8_t> dst, std::chrono::steady_clock::time_point deadline);

  int fd_ = -1;
  Bytes buffer_;
  size_t buffer_pos_ = 0;
};

// One-shot request on a fresh connection.
std::vector<Message> request(const Endpoint& endpoint, std::string_view command,
                             std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace brickstore
