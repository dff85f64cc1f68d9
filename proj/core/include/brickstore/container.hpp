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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "brickstore/io.hpp"

namespace brickstore {

// One timestamped, topic-tagged payload. Payload bytes are opaque.
struct Message {
  uint64_t timestamp = 0;  // ns since Unix epoch
  std::string topic;
  Bytes payload;

  bool operator==(const Message&) const = default;
};

// A frame as it sits in a brick: u32 payload length, u64 timestamp, payload.
inline constexpr size_t kFrameHeaderSize = 12;
inline constexpr uint64_t kNanosPerSecond = 1'000'000'000ULL;
inline constexpr uint32_t kContainerFormatVersion = 1;

struct Record {
  uint64_t offset = 0;
  uint64_t timestamp = 0;
  Bytes payload;

  uint64_t end_offset() const { return offset + kFrameHeaderSize + payload.size(); }
  bool operator==(const Record&) const = default;
};

struct TopicInfo {
  uint32_t id = 0;
  std::string name;
  std::string type;
  uint64_t message_count = 0;
  uint64_t payload_bytes = 0;
  uint64_t first_timestamp = 0;
  uint64_t last_timestamp = 0;

  bool operator==(const TopicInfo&) const = default;
};

struct ContainerMetadata {
  uint32_t format_version = kContainerFormatVersion;
  uint64_t start_timestamp = 0;
  uint64_t end_timestamp = 0;
  std::vector<TopicInfo> topics;  // indexed by topic id

  size_t topic_count() const { return topics.size(); }
  uint64_t message_count() const;
  bool operator==(const ContainerMetadata&) const = default;
};

namespace layout {
inline constexpr std::string_view kMetadataFile = "metadata";
inline constexpr std::string_view kIndexFile = "time.idx";

std::filesystem::path metadata_path(const std::filesystem::path& root);
std::filesystem::path index_path(const std::filesystem::path& root);
std::filesystem::path brick_path(const std::filesystem::path& root, uint32_t topic_id);
}  // namespace layout

std::string encode_metadata(const ContainerMetadata& meta);
// Throws kCorruptMetadata on any malformed input.
ContainerMetadata decode_metadata(std::string_view text);
ContainerMetadata read_metadata(const std::filesystem::path& root);
void write_metadata(const std::filesystem::path& root, const ContainerMetadata& meta);

// Rejects names the metadata encoding cannot carry.
void validate_topic_name(std::string_view name);

// Append side of one brick file. append() has a single caller; sync() may
// run concurrently from another thread.
class BrickWriter {
 public:
  BrickWriter(const std::filesystem::path& path, bool create);

  // Returns the start offset of the new frame.
  uint64_t append(uint64_t timestamp, ByteView payload);
  uint64_t size() const { return size_.load(std::memory_order_acquire); }
  uint64_t last_timestamp() const { return last_timestamp_; }

  // Makes every byte appended so far durable. Returns false if nothing was pending.
  bool sync();

 private:
  File file_;
  std::atomic<uint64_t> size_{0};
  uint64_t last_timestamp_ = 0;
  std::mutex sync_mu_;
  uint64_t synced_ = 0;
};

// Read side of one brick file. Safe for concurrent use; the file may be
// growing underneath.
class BrickReader {
 public:
  explicit BrickReader(const std::filesystem::path& path);

  Record read_record_at(uint64_t offset) const;
  // Records whose frames start in [start_offset, end_offset), file order.
  std::vector<Record> read_sequential(uint64_t start_offset, uint64_t end_offset) const;
  // One past the frame starting at `offset`; reads only the header.
  uint64_t record_end(uint64_t offset) const;
  uint64_t size() const { return file_.size(); }

 private:
  File file_;
};

// Writable handle on a topic container: bricks plus metadata.
class ContainerWriter {
 public:
  // Creates the directory, an empty metadata file and an empty time index.
  // Fails with kAlreadyExists if root exists and is non-empty.
  static ContainerWriter create(const std::filesystem::path& root);

  ContainerWriter(ContainerWriter&&) noexcept = default;
  ContainerWriter& operator=(ContainerWriter&&) noexcept = default;

  const std::filesystem::path& root() const { return root_; }

  // Creates "<id>.brick". Ids must be added densely starting at 0.
  void add_brick(uint32_t topic_id);
  size_t brick_count() const;

  // Appends a frame to the topic's brick. The message's topic name is not
  // consulted; the id selects the brick.
  uint64_t append_record(uint32_t topic_id, const Message& msg);
  uint64_t brick_size(uint32_t topic_id) const;

  // Syncs dirty bricks. Returns the number of bricks synced.
  size_t sync_bricks();
  void sync_brick(uint32_t topic_id);

  void write_metadata(const ContainerMetadata& meta);

 private:
  explicit ContainerWriter(std::filesystem::path root) : root_(std::move(root)) {}
  BrickWriter& brick(uint32_t topic_id);
  const BrickWriter& brick(uint32_t topic_id) const;

  std::filesystem::path root_;
  // Guards the vector, not the bricks: add_brick may race with sync_bricks.
  std::unique_ptr<std::shared_mutex> bricks_mu_ = std::make_unique<std::shared_mutex>();
  std::vector<std::unique_ptr<BrickWriter>> bricks_;
};

// Read-only handle; bricks are opened lazily and cached.
class ContainerReader {
 public:
  explicit ContainerReader(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  const BrickReader& brick(uint32_t topic_id) const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  mutable std::vector<std::unique_ptr<BrickReader>> bricks_;
};

}  // namespace brickstore
