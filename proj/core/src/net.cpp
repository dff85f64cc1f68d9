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

#include "brickstore/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "brickstore/error.hpp"

namespace brickstore {

namespace {

using Clock = std::chrono::steady_clock;

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void send_all(int fd, const uint8_t* data, size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("send");
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
}

int poll_timeout_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(std::min<int64_t>(left, 1 << 30));
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kBadParam, fmt::format("endpoint '{}' is not host:port", text));
  }
  Endpoint ep;
  if (colon > 0) {
    ep.host = std::string(text.substr(0, colon));
  }
  const auto port = text.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
    throw Error(ErrorCode::kBadParam, fmt::format("bad port in endpoint '{}'", text));
  }
  ep.port = static_cast<uint16_t>(value);
  return ep;
}

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

TokenBucket::TokenBucket(double bytes_per_second) { set_rate(bytes_per_second); }

void TokenBucket::set_rate(double bytes_per_second) {
  std::lock_guard lock(mu_);
  rate_ = bytes_per_second > 0 ? bytes_per_second : 0;
  // 10 ms worth of burst, never less than one 16 KB chunk.
  burst_ = std::max(16.0 * 1024, rate_ * 0.01);
  tokens_ = std::min(tokens_, burst_);
  last_ = Clock::now();
}

double TokenBucket::rate() const {
  std::lock_guard lock(mu_);
  return rate_;
}

void TokenBucket::acquire(size_t bytes) {
  double wait_s = 0;
  {
    std::lock_guard lock(mu_);
    if (rate_ <= 0) {
      return;
    }
    const auto now = Clock::now();
    const double dt = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + dt * rate_);
    // Going negative queues later callers behind this one.
    tokens_ -= static_cast<double>(bytes);
    if (tokens_ < 0) {
      wait_s = -tokens_ / rate_;
    }
  }
  if (wait_s > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
  }
}

Server::Server(const std::filesystem::path& container, ServerOptions options)
    : engine_(container, options.index_access),
      options_(std::move(options)),
      bucket_(options_.throttle_bytes_per_second),
      monitor_(options_.bandwidth_alpha, std::chrono::seconds(1)) {
  if (options_.assumed_bytes_per_second) {
    monitor_.record(static_cast<uint64_t>(*options_.assumed_bytes_per_second), std::chrono::seconds(1));
  }
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) {
    return;
  }
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(options_.bind.port);
  const char* host = options_.bind.host.empty() ? nullptr : options_.bind.host.c_str();
  if (int rc = ::getaddrinfo(host, port.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::kIoError, fmt::format("resolve {}: {}", options_.bind.to_string(), gai_strerror(rc)));
  }
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);
  listen_fd_ = ::socket(res->ai_family, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) {
    throw_errno("socket");
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 128) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    errno = err;
    throw_errno(fmt::format("bind {}", options_.bind.to_string()));
  }
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                           : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  sampler_thread_ = std::thread([this] { sampler_loop(); });
  spdlog::info("serving {} on {}", engine_.root().string(), endpoint().to_string());
}

void Server::stop() {
  if (!running_.exchange(false)) {
    return;
  }
  {
    std::lock_guard lock(sampler_mu_);
    sampler_cv_.notify_all();
  }
  if (accept_thread_.joinable()) {
    accept_thread_.join();
  }
  if (sampler_thread_.joinable()) {
    sampler_thread_.join();
  }
  ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::lock_guard lock(conn_mu_);
    for (auto& c : connections_) {
      ::shutdown(c->fd, SHUT_RDWR);
    }
  }
  reap(true);
}

Endpoint Server::endpoint() const {
  Endpoint ep = options_.bind;
  if (ep.host.empty() || ep.host == "0.0.0.0") {
    ep.host = "127.0.0.1";
  }
  ep.port = port_;
  return ep;
}

void Server::throttle_link(double bytes_per_second) {
  bucket_.set_rate(bytes_per_second);
  spdlog::info("link throttle set to {:.0f} B/s", bytes_per_second);
}

ServerStats Server::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void Server::set_observer(std::function<void(const ServiceRecord&)> observer) {
  std::lock_guard lock(stats_mu_);
  observer_ = std::move(observer);
}

void Server::reap(bool all) {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::lock_guard lock(conn_mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (all || (*it)->done) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    if (c->thread.joinable()) {
      c->thread.join();
    }
  }
}

void Server::accept_loop() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    reap(false);
    if (rc <= 0) {
      continue;
    }
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      continue;
    }
    set_nodelay(fd);
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.connections;
    }
    auto conn = std::make_unique<Connection>();
    conn->fd = fd;
    Connection* raw = conn.get();
    std::lock_guard lock(conn_mu_);
    connections_.push_back(std::move(conn));
    raw->thread = std::thread([this, raw] { serve_connection(raw); });
  }
}

void Server::sampler_loop() {
  // The throttle stands in for the link; its configured rate is what an
  // interface-rate probe would report.
  const auto period = options_.bandwidth_sample_period;
  std::unique_lock lock(sampler_mu_);
  while (running_) {
    sampler_cv_.wait_for(lock, period, [&] { return !running_; });
    if (!running_) {
      break;
    }
    const double rate = bucket_.rate();
    if (rate > 0) {
      const double secs = std::chrono::duration<double>(period).count();
      monitor_.record(static_cast<uint64_t>(rate * secs), period);
    }
  }
}

ResponseFrame Server::handle(std::string_view line, ServiceRecord* record) {
  const auto t0 = Clock::now();
  ResponseFrame frame;
  double budget = 0;
  try {
    const QueryCommand cmd = parse_command(line);
    QueryResult result;
    switch (cmd.kind) {
      case CommandKind::kLatest:
        result = engine_.latest(cmd.topics, cmd.time_len_ns);
        break;
      case CommandKind::kHistory:
        result = engine_.history(cmd.topics, cmd.start_ns, cmd.end_ns);
        break;
      case CommandKind::kAuto:
        result = engine_.automatic(cmd.topics, static_cast<double>(cmd.target_ns) / 1e9, monitor_.estimate());
        break;
    }
    budget = result.stats.budget_bytes;
    frame.messages = std::move(result.messages);
  } catch (const Error& e) {
    frame = ResponseFrame::error(e.code(), e.what());
  } catch (const std::exception& e) {
    frame = ResponseFrame::error(ErrorCode::kInternal, e.what());
  }
  if (record != nullptr) {
    record->command = std::string(line);
    record->code = frame.error_code;
    record->messages = frame.messages.size();
    record->budget_bytes = budget;
    record->payload_bytes = 0;
    for (const auto& m : frame.messages) {
      record->payload_bytes += m.payload.size();
    }
    record->service_time = Clock::now() - t0;
  }
  return frame;
}

void Server::send_frame(int fd, const Bytes& frame) {
  const bool throttled = bucket_.rate() > 0;
  const auto t0 = Clock::now();
  for (size_t pos = 0; pos < frame.size();) {
    const size_t n = std::min(options_.send_chunk, frame.size() - pos);
    bucket_.acquire(n);
    send_all(fd, frame.data() + pos, n);
    pos += n;
  }
  if (!throttled && frame.size() >= options_.measure_min_bytes) {
    const auto elapsed = Clock::now() - t0;
    if (elapsed.count() > 0) {
      monitor_.record(frame.size(), elapsed);
    }
  }
}

void Server::serve_connection(Connection* conn) {
  std::string buffer;
  char chunk[16 * 1024];
  try {
    while (running_) {
      auto nl = buffer.find('\n');
      while (nl == std::string::npos) {
        if (buffer.size() > options_.max_line) {
          const auto frame = encode_response(ResponseFrame::error(ErrorCode::kBadCommand, "request line too long"));
          send_all(conn->fd, frame.data(), frame.size());
          throw Error(ErrorCode::kBadCommand, "request line too long");
        }
        const ssize_t n = ::recv(conn->fd, chunk, sizeof(chunk), 0);
        if (n < 0 && errno == EINTR) {
          continue;
        }
        if (n <= 0) {
          throw Error(ErrorCode::kIoError, "connection closed");
        }
        buffer.append(chunk, static_cast<size_t>(n));
        nl = buffer.find('\n');
      }
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);

      ServiceRecord rec;
      const ResponseFrame frame = handle(line, &rec);
      const Bytes bytes = encode_response(frame);
      const auto t_send = Clock::now();
      send_frame(conn->fd, bytes);
      rec.send_time = Clock::now() - t_send;

      std::function<void(const ServiceRecord&)> observer;
      {
        std::lock_guard lock(stats_mu_);
        ++stats_.requests;
        if (rec.code != ErrorCode::kOk) {
          ++stats_.errors;
        }
        observer = observer_;
      }
      spdlog::debug("'{}' -> {} ({} msgs, {} B) service {} us send {} us", rec.command,
                    error_code_name(rec.code), rec.messages, rec.payload_bytes,
                    std::chrono::duration_cast<std::chrono::microseconds>(rec.service_time).count(),
                    std::chrono::duration_cast<std::chrono::microseconds>(rec.send_time).count());
      if (observer) {
        observer(rec);
      }
    }
  } catch (const std::exception& e) {
    spdlog::debug("connection ended: {}", e.what());
  }
  ::close(conn->fd);
  conn->done = true;
}

Client::Client(const Endpoint& endpoint, std::chrono::milliseconds connect_timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::kIoError, fmt::format("resolve {}: {}", endpoint.to_string(), gai_strerror(rc)));
  }
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);
  fd_ = ::socket(res->ai_family, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd_ < 0) {
    throw_errno("socket");
  }
  if (::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    if (errno != EINPROGRESS) {
      const int err = errno;
      close();
      errno = err;
      throw_errno(fmt::format("connect {}", endpoint.to_string()));
    }
    pollfd pfd{fd_, POLLOUT, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(connect_timeout.count()));
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd_, SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc <= 0 || err != 0) {
      close();
      if (rc == 0) {
        throw Error(ErrorCode::kTimeout, fmt::format("connect {} timed out", endpoint.to_string()));
      }
      errno = err;
      throw_errno(fmt::format("connect {}", endpoint.to_string()));
    }
  }
  const int flags = ::fcntl(fd_, F_GETFL);
  ::fcntl(fd_, F_SETFL, flags & ~O_NONBLOCK);
  set_nodelay(fd_);
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Client::read_exact(std::span<uint8_t> dst, Clock::time_point deadline) {
  size_t done = 0;
  while (done < dst.size()) {
    if (buffer_pos_ < buffer_.size()) {
      const size_t n = std::min(dst.size() - done, buffer_.size() - buffer_pos_);
      std::memcpy(dst.data() + done, buffer_.data() + buffer_pos_, n);
      buffer_pos_ += n;
      done += n;
      continue;
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, poll_timeout_ms(deadline));
    if (rc == 0) {
      throw Error(ErrorCode::kTimeout, "timed out waiting for reply");
    }
    if (rc < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("poll");
    }
    buffer_.resize(256 * 1024);
    const ssize_t n = ::recv(fd_, buffer_.data(), buffer_.size(), 0);
    if (n < 0 && errno == EINTR) {
      buffer_.clear();
      buffer_pos_ = 0;
      continue;
    }
    if (n <= 0) {
      buffer_.clear();
      buffer_pos_ = 0;
      throw Error(ErrorCode::kBadFrame, "connection closed mid-frame");
    }
    buffer_.resize(static_cast<size_t>(n));
    buffer_pos_ = 0;
  }
}

ResponseFrame Client::request_frame(std::string_view command, std::chrono::milliseconds timeout) {
  if (fd_ < 0) {
    throw Error(ErrorCode::kIoError, "client is closed");
  }
  const auto deadline = Clock::now() + timeout;
  std::string line(command);
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.pop_back();
  }
  line += '\n';
  send_all(fd_, reinterpret_cast<const uint8_t*>(line.data()), line.size());
  try {
    return read_response([&](std::span<uint8_t> dst) { read_exact(dst, deadline); });
  } catch (...) {
    // The stream position is unknown now; the connection cannot be reused.
    close();
    throw;
  }
}

std::vector<Message> Client::request(std::string_view command, std::chrono::milliseconds timeout) {
  return unwrap_response(request_frame(command, timeout));
}

std::vector<Message> request(const Endpoint& endpoint, std::string_view command,
                             std::chrono::milliseconds timeout) {
  Client client(endpoint, timeout);
  return client.request(command, timeout);
}

}  // namespace brickstore
