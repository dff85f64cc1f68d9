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

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "brickstore/container.hpp"
#include "brickstore/recorder.hpp"

namespace brickstore::testing {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    const char* base = std::getenv("BRICKSTORE_TEST_TMP");
    path_ = std::filesystem::path(base != nullptr ? base : std::filesystem::temp_directory_path().string()) /
            ("brickstore-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Replays a fixed vector of messages.
class VectorSource : public MessageSource {
 public:
  explicit VectorSource(std::vector<Message> messages, std::string type = "test/Blob")
      : messages_(std::move(messages)), type_(std::move(type)) {}
  std::optional<Message> next() override {
    if (pos_ >= messages_.size()) {
      return std::nullopt;
    }
    return messages_[pos_++];
  }
  std::string message_type(std::string_view) const override { return type_; }

 private:
  std::vector<Message> messages_;
  std::string type_;
  size_t pos_ = 0;
};

inline Bytes random_bytes(std::mt19937_64& rng, size_t n) {
  Bytes out(n);
  for (auto& b : out) {
    b = static_cast<uint8_t>(rng());
  }
  return out;
}

// Random multi-topic log; timestamps are non-decreasing per topic and may
// repeat, including across topics.
inline std::vector<Message> random_log(std::mt19937_64& rng, size_t count, size_t topics, uint64_t start,
                                       size_t max_payload = 64) {
  std::vector<Message> out;
  out.reserve(count);
  uint64_t ts = start;
  for (size_t i = 0; i < count; ++i) {
    ts += rng() % 4 == 0 ? 0 : 1 + rng() % 1000;
    const auto t = rng() % topics;
    out.push_back(Message{ts, "/topic" + std::to_string(t), random_bytes(rng, rng() % (max_payload + 1))});
  }
  return out;
}

// Linear-scan oracle: messages of `topics` (deduplicated, in request order)
// with timestamps in [lo, hi], each group in log order.
inline std::vector<Message> oracle_range(const std::vector<Message>& log, const std::vector<std::string>& topics,
                                         uint64_t lo, uint64_t hi) {
  std::vector<Message> out;
  std::vector<std::string> seen;
  for (const auto& t : topics) {
    if (std::find(seen.begin(), seen.end(), t) != seen.end()) {
      continue;
    }
    seen.push_back(t);
    for (const auto& m : log) {
      if (m.topic == t && m.timestamp >= lo && m.timestamp <= hi) {
        out.push_back(m);
      }
    }
  }
  return out;
}

}  // namespace brickstore::testing
