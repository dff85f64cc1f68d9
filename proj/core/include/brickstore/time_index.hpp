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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "brickstore/io.hpp"

namespace brickstore {

// Composite key ordered lexicographically by (timestamp, topic_id, seq).
// seq disambiguates messages of one topic that share a timestamp.
struct IndexKey {
  uint64_t timestamp = 0;
  uint32_t topic_id = 0;
  uint32_t seq = 0;

  auto operator<=>(const IndexKey&) const = default;
};

struct IndexEntry {
  IndexKey key;
  uint64_t offset = 0;  // start of the frame in brick <topic_id>

  bool operator==(const IndexEntry&) const = default;
};

// Byte range [start, end) of a brick. start == end means no records.
struct OffsetRange {
  uint64_t start = 0;
  uint64_t end = 0;

  bool empty() const { return start == end; }
  bool operator==(const OffsetRange&) const = default;
};

inline constexpr uint32_t kIndexPageSize = 4096;
inline constexpr uint32_t kIndexVersion = 1;
inline constexpr uint32_t kChecksumCrc32 = 1;
inline constexpr size_t kIndexNodeHeader = 16;
inline constexpr size_t kIndexSlotSize = 24;  // 16-byte key + 8-byte value
// Entries per leaf and children per internal node.
inline constexpr size_t kIndexFanout = (kIndexPageSize - kIndexNodeHeader) / kIndexSlotSize;

// Decoded header of time.idx (page 0). Two copies live in page 0 and the one
// with the highest valid flush_seq wins, so a torn header write never loses
// the previous state.
struct IndexHeader {
  uint32_t version = kIndexVersion;
  uint32_t page_size = kIndexPageSize;
  uint32_t checksum_algorithm = kChecksumCrc32;
  uint64_t flush_seq = 0;
  uint64_t root_page = 0;  // 0 when the tree is empty
  uint64_t page_count = 1;
  uint64_t entry_count = 0;
  uint64_t garbage_pages = 0;
  uint32_t height = 0;
  uint32_t topic_limit = 0;  // 1 + largest topic id present
  std::optional<IndexKey> watermark;

  bool operator==(const IndexHeader&) const = default;
};

namespace detail {
struct IndexNode {
  bool leaf = true;
  std::vector<IndexKey> keys;
  std::vector<uint64_t> values;  // frame offsets in leaves, child pages otherwise
};
}  // namespace detail

// Single-producer buffer of entries not yet persisted. Thread-safe.
class IndexCache {
 public:
  // Rejects keys that do not strictly exceed the last key of the same topic.
  void insert(const IndexEntry& entry);
  // Removes and returns every pending entry, sorted by key.
  std::vector<IndexEntry> take();
  // Puts back entries from a failed flush.
  void restore(std::vector<IndexEntry> entries);
  size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::vector<IndexEntry> pending_;
  std::vector<std::optional<IndexKey>> last_per_topic_;
};

// Copy-on-write B+ tree writer. Published pages are never modified, so
// readers holding an older header keep a consistent view.
class TimeIndexWriter {
 public:
  enum class FlushStage { kBeforePages, kBeforeHeader };
  using FaultHook = std::function<void(FlushStage)>;

  // Writes a fresh file holding only the header page.
  static void initialize(const std::filesystem::path& path);

  explicit TimeIndexWriter(const std::filesystem::path& path);

  // Persists `entries` (any order, unique keys). Pages are synced before the
  // header that references them. Returns the new watermark. On failure the
  // published state is unchanged.
  std::optional<IndexKey> flush(std::vector<IndexEntry> entries);
  // Drains the cache; on failure the entries are returned to it.
  std::optional<IndexKey> flush(IndexCache& cache);

  const IndexHeader& header() const { return header_; }
  std::optional<IndexKey> watermark() const { return header_.watermark; }

  // Test hook invoked at each flush stage; may throw to simulate a crash.
  void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

 private:
  using Node = detail::IndexNode;
  struct Split {
    IndexKey separator;
    uint64_t right;
  };
  struct InsertResult {
    uint64_t page;
    std::optional<Split> split;
  };

  Node load(uint64_t page) const;
  uint64_t make_dirty(uint64_t page);
  uint64_t allocate(Node node);
  InsertResult insert(uint64_t page, const IndexEntry& entry, bool rightmost);
  std::optional<Split> split_if_needed(uint64_t page, bool append_split);
  void publish(const IndexHeader& next);

  File file_;
  IndexHeader header_;
  uint64_t next_page_ = 1;
  uint64_t garbage_ = 0;
  std::unordered_map<uint64_t, Node> dirty_;
  FaultHook fault_hook_;
};

// Read-only view over a (possibly growing) time.idx. Each public query takes
// one header snapshot and only follows pages it references.
class TimeIndexReader {
 public:
  enum class Access { kMmap, kPread };
  // Maps a (topic, frame offset) to the offset one past that frame.
  using EndResolver = std::function<uint64_t(uint32_t topic_id, uint64_t offset)>;

  explicit TimeIndexReader(const std::filesystem::path& path, Access access = Access::kMmap);
  ~TimeIndexReader();

  TimeIndexReader(const TimeIndexReader&) = delete;
  TimeIndexReader& operator=(const TimeIndexReader&) = delete;

  // Current published header (acquire point for readers).
  IndexHeader snapshot() const;
  Access access() const { return access_; }

  // For each topic: offsets of the first record with timestamp >= start and
  // one past the last record with timestamp <= end. Closed range.
  std::map<uint32_t, OffsetRange> search_range(uint64_t start_time, uint64_t end_time,
                                               std::span<const uint32_t> topic_ids,
                                               const EndResolver& resolve_end) const;
  std::map<uint32_t, OffsetRange> search_range(const IndexHeader& snap, uint64_t start_time,
                                               uint64_t end_time, std::span<const uint32_t> topic_ids,
                                               const EndResolver& resolve_end) const;

  // Half-open window (watermark - time_len, watermark]. Throws kEmptyIndex.
  std::map<uint32_t, OffsetRange> search_latest(std::span<const uint32_t> topic_ids,
                                                uint64_t time_len_ns,
                                                const EndResolver& resolve_end) const;

  std::optional<IndexEntry> first_at_or_after(const IndexHeader& snap, uint32_t topic_id,
                                              uint64_t start_time, uint64_t end_time) const;
  std::optional<IndexEntry> last_at_or_before(const IndexHeader& snap, uint32_t topic_id,
                                              uint64_t end_time, uint64_t start_time) const;

  // In-order visit of every entry with lo <= key <= hi. Returning false stops.
  void scan(const IndexHeader& snap, IndexKey lo, IndexKey hi,
            const std::function<bool(const IndexEntry&)>& visit) const;
  std::vector<IndexEntry> entries(const IndexHeader& snap) const;

 private:
  using Node = detail::IndexNode;
  class Cursor;
  struct Mapping;

  Node read_node(uint64_t page) const;
  std::shared_ptr<const Mapping> mapping_for(uint64_t page) const;

  File file_;
  Access access_;
  mutable std::shared_mutex map_mu_;
  mutable std::shared_ptr<const Mapping> mapping_;
};

struct IndexCheckReport {
  IndexHeader header;
  uint64_t leaf_pages = 0;
  uint64_t internal_pages = 0;
  uint64_t truncated_bytes = 0;  // unpublished tail removed on recovery
};

// Validates the published tree (page checksums, key order, separator bounds,
// occupancy, counts, watermark). With `repair`, first drops pages past the
// published page_count. Throws kCorruptIndex carrying the page id.
IndexCheckReport recover_index(const std::filesystem::path& path, bool repair = true);

inline constexpr size_t kIndexHeaderSlotSize = kIndexPageSize / 2;
// One header copy; it belongs at slot (flush_seq % 2) of page 0.
Bytes encode_index_header_slot(const IndexHeader& header);
// Picks the newest slot whose checksum verifies. Throws kCorruptIndex.
IndexHeader decode_index_header_page(ByteView page);

}  // namespace brickstore
