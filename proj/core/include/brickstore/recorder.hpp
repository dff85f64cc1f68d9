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
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "brickstore/container.hpp"
#include "brickstore/time_index.hpp"
#include "brickstore/topic_table.hpp"

namespace brickstore {

// Pull-based message stream. next() returns nullopt at end of stream.
class MessageSource {
 public:
  virtual ~MessageSource() = default;
  virtual std::optional<Message> next() = 0;
  // Type label recorded for a topic on first sight.
  virtual std::string message_type(std::string_view topic) const = 0;
};

enum class Durability {
  kBuffered,   // no syncs; survives process death, not power loss
  kRangeSync,  // brick ranges synced before each index publication
  kParanoid,   // every frame synced before its index entry is cached
};

enum class OutOfOrderPolicy { kReject, kClamp };

struct RecorderOptions {
  size_t flush_entries = 256;
  std::chrono::milliseconds flush_interval{100};
  Durability durability = Durability::kRangeSync;
  OutOfOrderPolicy out_of_order = OutOfOrderPolicy::kReject;
  size_t queue_capacity = 1024;
  // Pace replay by message timestamps; speed > 1 runs faster than real time.
  bool realtime = false;
  double realtime_speed = 1.0;
};

struct RecorderStats {
  uint64_t messages_written = 0;
  uint64_t bytes_written = 0;  // payload bytes
  uint64_t dropped = 0;
  uint64_t flushes = 0;
};

// Bounded blocking queue; close() wakes everyone and makes push fail.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) {
      return false;
    }
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) {
      return std::nullopt;
    }
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  const size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

// Write path of a topic container. One thread calls ingest(); a background
// thread drains the index cache. An index entry only becomes visible after
// its frame has been written (and synced, per the durability policy).
class Recorder {
 public:
  Recorder(const std::filesystem::path& root, RecorderOptions options = {});
  ~Recorder();

  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  // Throws kOutOfOrderTimestamp under kReject (the drop is counted first).
  void ingest(const Message& msg, std::string_view message_type = {});
  // Synchronous flush of the index cache; returns the watermark.
  std::optional<IndexKey> flush();
  ContainerMetadata close();

  std::optional<IndexKey> watermark() const;
  RecorderStats stats() const;
  ContainerMetadata metadata_snapshot() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  void flusher_loop();
  void flush_locked();

  std::filesystem::path root_;
  RecorderOptions options_;
  ContainerWriter container_;
  TopicTable topics_;
  IndexCache cache_;
  TimeIndexWriter index_;

  mutable std::mutex meta_mu_;
  ContainerMetadata meta_;
  std::vector<uint32_t> last_seq_;
  RecorderStats stats_;

  std::mutex flush_mu_;
  size_t metadata_topics_written_ = 0;
  std::mutex wake_mu_;
  std::condition_variable wake_;
  bool stop_ = false;
  bool closed_ = false;
  std::thread flusher_;

  mutable std::mutex wm_mu_;
  std::optional<IndexKey> watermark_;
};

// Pipes a source into a fresh container: one producer thread feeding the
// bounded queue, ingest on the calling thread.
ContainerMetadata record(MessageSource& source, const std::filesystem::path& root,
                         const RecorderOptions& options = {}, RecorderStats* stats_out = nullptr);

// Brings a container left behind by a crashed recorder back to a state
// where every invariant holds: index validated and tail pages dropped,
// bricks truncated to the last indexed frame, metadata rebuilt from the
// index. Returns the rebuilt metadata.
struct RecoveryReport {
  ContainerMetadata metadata;
  IndexCheckReport index;
  uint64_t brick_bytes_truncated = 0;
  std::vector<uint32_t> orphan_bricks_removed;
};
RecoveryReport recover_container(const std::filesystem::path& root);

// Full consistency check of a closed container; throws on the first violation.
void verify_container(const std::filesystem::path& root);

}  // namespace brickstore
