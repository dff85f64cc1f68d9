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

#include "brickstore/recorder.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>
#include <limits>

#include "brickstore/error.hpp"

namespace brickstore {

namespace fs = std::filesystem;

Recorder::Recorder(const fs::path& root, RecorderOptions options)
    : root_(root),
      options_(options),
      container_(ContainerWriter::create(root)),
      topics_(root),
      index_(layout::index_path(root)) {
  flusher_ = std::thread([this] { flusher_loop(); });
}

Recorder::~Recorder() {
  if (!closed_) {
    try {
      close();
    } catch (const std::exception& e) {
      spdlog::error("recorder close during destruction failed: {}", e.what());
    }
  }
}

void Recorder::ingest(const Message& msg, std::string_view message_type) {
  if (closed_) {
    throw Error(ErrorCode::kInternal, "ingest on a closed recorder");
  }
  if (msg.timestamp == 0) {
    throw Error(ErrorCode::kInvalidMessage, "timestamp must be positive");
  }
  const auto reg = topics_.register_topic(msg.topic, message_type);
  const uint32_t id = reg.id;
  if (reg.created) {
    container_.add_brick(id);
    std::lock_guard lock(meta_mu_);
    TopicInfo info;
    info.id = id;
    info.name = msg.topic;
    info.type = std::string(message_type);
    meta_.topics.push_back(std::move(info));
    last_seq_.push_back(0);
  }

  uint64_t timestamp = msg.timestamp;
  uint64_t last_ts = 0;
  uint64_t count = 0;
  {
    std::lock_guard lock(meta_mu_);
    last_ts = meta_.topics[id].last_timestamp;
    count = meta_.topics[id].message_count;
  }
  if (count > 0 && timestamp < last_ts) {
    if (options_.out_of_order == OutOfOrderPolicy::kClamp) {
      timestamp = last_ts;
    } else {
      {
        std::lock_guard lock(meta_mu_);
        ++stats_.dropped;
      }
      spdlog::warn("dropping out-of-order message on {}: {} < {}", msg.topic, msg.timestamp, last_ts);
      throw Error(ErrorCode::kOutOfOrderTimestamp,
                  "timestamp " + std::to_string(msg.timestamp) + " precedes " + std::to_string(last_ts) +
                      " on " + msg.topic);
    }
  }

  uint64_t offset = 0;
  if (timestamp == msg.timestamp) {
    offset = container_.append_record(id, msg);
  } else {
    Message clamped{timestamp, msg.topic, msg.payload};
    offset = container_.append_record(id, clamped);
  }
  if (options_.durability == Durability::kParanoid) {
    container_.sync_brick(id);
  }

  uint32_t seq = 0;
  {
    std::lock_guard lock(meta_mu_);
    auto& t = meta_.topics[id];
    seq = (t.message_count > 0 && t.last_timestamp == timestamp) ? last_seq_[id] + 1 : 0;
    last_seq_[id] = seq;
    if (t.message_count == 0) {
      t.first_timestamp = timestamp;
    }
    t.last_timestamp = timestamp;
    ++t.message_count;
    t.payload_bytes += msg.payload.size();
    ++stats_.messages_written;
    stats_.bytes_written += msg.payload.size();
  }
  // Frame bytes are in the file before the entry can reach a flush.
  cache_.insert({{timestamp, id, seq}, offset});
  if (cache_.pending() >= options_.flush_entries) {
    wake_.notify_one();
  }
}

ContainerMetadata Recorder::metadata_snapshot() const {
  std::lock_guard lock(meta_mu_);
  ContainerMetadata meta = meta_;
  bool any = false;
  for (const auto& t : meta.topics) {
    if (t.message_count == 0) {
      continue;
    }
    meta.start_timestamp = any ? std::min(meta.start_timestamp, t.first_timestamp) : t.first_timestamp;
    meta.end_timestamp = any ? std::max(meta.end_timestamp, t.last_timestamp) : t.last_timestamp;
    any = true;
  }
  return meta;
}

void Recorder::flush_locked() {
  auto entries = cache_.take();
  const ContainerMetadata meta = metadata_snapshot();
  if (entries.empty() && meta.topics.size() == metadata_topics_written_) {
    return;
  }
  try {
    if (options_.durability != Durability::kBuffered) {
      container_.sync_bricks();
    }
    // Metadata goes first so every topic id in the published index is
    // already named in the metadata file.
    container_.write_metadata(meta);
    metadata_topics_written_ = meta.topics.size();
    if (entries.empty()) {
      return;
    }
    const auto wm = index_.flush(entries);
    {
      std::lock_guard lock(meta_mu_);
      ++stats_.flushes;
    }
    std::lock_guard lock(wm_mu_);
    watermark_ = wm;
  } catch (...) {
    cache_.restore(std::move(entries));
    throw;
  }
}

std::optional<IndexKey> Recorder::flush() {
  std::lock_guard lock(flush_mu_);
  flush_locked();
  return watermark();
}

void Recorder::flusher_loop() {
  std::unique_lock lock(wake_mu_);
  while (!stop_) {
    wake_.wait_for(lock, options_.flush_interval,
                   [&] { return stop_ || cache_.pending() >= options_.flush_entries; });
    if (stop_) {
      break;
    }
    lock.unlock();
    try {
      std::lock_guard flush_lock(flush_mu_);
      flush_locked();
    } catch (const std::exception& e) {
      // Entries went back into the cache; the next round retries.
      spdlog::error("time index flush failed: {}", e.what());
    }
    lock.lock();
  }
}

ContainerMetadata Recorder::close() {
  if (closed_) {
    return metadata_snapshot();
  }
  {
    std::lock_guard lock(wake_mu_);
    stop_ = true;
  }
  wake_.notify_all();
  if (flusher_.joinable()) {
    flusher_.join();
  }
  closed_ = true;
  std::lock_guard lock(flush_mu_);
  flush_locked();
  container_.write_metadata(metadata_snapshot());
  container_.sync_bricks();
  return metadata_snapshot();
}

std::optional<IndexKey> Recorder::watermark() const {
  std::lock_guard lock(wm_mu_);
  return watermark_;
}

RecorderStats Recorder::stats() const {
  std::lock_guard lock(meta_mu_);
  return stats_;
}

ContainerMetadata record(MessageSource& source, const fs::path& root, const RecorderOptions& options,
                         RecorderStats* stats_out) {
  Recorder recorder(root, options);
  BoundedQueue<std::pair<Message, std::string>> queue(options.queue_capacity);
  std::exception_ptr producer_error;

  std::thread producer([&] {
    try {
      const auto wall_start = std::chrono::steady_clock::now();
      uint64_t first_ts = 0;
      while (auto msg = source.next()) {
        if (options.realtime) {
          if (first_ts == 0) {
            first_ts = msg->timestamp;
          }
          const double speed = options.realtime_speed > 0 ? options.realtime_speed : 1.0;
          const auto delta = msg->timestamp > first_ts ? msg->timestamp - first_ts : 0;
          std::this_thread::sleep_until(
              wall_start + std::chrono::nanoseconds(static_cast<int64_t>(static_cast<double>(delta) / speed)));
        }
        std::string type = source.message_type(msg->topic);
        if (!queue.push({std::move(*msg), std::move(type)})) {
          return;
        }
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  try {
    while (auto item = queue.pop()) {
      try {
        recorder.ingest(item->first, item->second);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kOutOfOrderTimestamp) {
          throw;
        }
      }
    }
  } catch (...) {
    queue.close();
    producer.join();
    throw;
  }
  producer.join();
  if (producer_error) {
    std::rethrow_exception(producer_error);
  }
  auto meta = recorder.close();
  if (stats_out != nullptr) {
    *stats_out = recorder.stats();
  }
  return meta;
}

// ---------------------------------------------------------------- recovery

RecoveryReport recover_container(const fs::path& root) {
  RecoveryReport report;
  report.index = recover_index(layout::index_path(root), true);
  const ContainerMetadata old = read_metadata(root);

  TimeIndexReader reader(layout::index_path(root), TimeIndexReader::Access::kPread);
  const IndexHeader snap = reader.snapshot();
  if (snap.topic_limit > old.topics.size()) {
    throw Error(ErrorCode::kCorruptMetadata, "time index references topics missing from metadata");
  }

  ContainerMetadata meta;
  meta.topics = old.topics;
  std::vector<std::optional<IndexEntry>> last_entry(meta.topics.size());
  for (auto& t : meta.topics) {
    t.message_count = 0;
    t.payload_bytes = 0;
    t.first_timestamp = 0;
    t.last_timestamp = 0;
  }
  for (const auto& e : reader.entries(snap)) {
    auto& t = meta.topics[e.key.topic_id];
    if (t.message_count == 0) {
      t.first_timestamp = e.key.timestamp;
    }
    t.last_timestamp = e.key.timestamp;
    ++t.message_count;
    auto& last = last_entry[e.key.topic_id];
    if (last && last->offset >= e.offset) {
      throw Error(ErrorCode::kCorruptIndex, "offsets not increasing for topic " + t.name);
    }
    last = e;
  }

  ContainerReader bricks(root);
  for (auto& t : meta.topics) {
    const auto path = layout::brick_path(root, t.id);
    if (!fs::exists(path)) {
      File create(path, File::Mode::kCreateNew);
    }
    uint64_t keep = 0;
    if (last_entry[t.id]) {
      const Record rec = bricks.brick(t.id).read_record_at(last_entry[t.id]->offset);
      if (rec.timestamp != last_entry[t.id]->key.timestamp) {
        throw Error(ErrorCode::kCorruptRecord, "indexed frame timestamp mismatch in " + path.string(),
                    rec.offset);
      }
      keep = rec.end_offset();
    }
    File brick(path, File::Mode::kReadWrite);
    const uint64_t size = brick.size();
    if (size > keep) {
      brick.truncate(keep);
      brick.datasync();
      report.brick_bytes_truncated += size - keep;
    }
    t.payload_bytes = keep - t.message_count * kFrameHeaderSize;
  }

  // Bricks for topics that never reached the metadata file.
  for (uint32_t id = static_cast<uint32_t>(meta.topics.size());; ++id) {
    const auto path = layout::brick_path(root, id);
    if (!fs::exists(path)) {
      break;
    }
    fs::remove(path);
    report.orphan_bricks_removed.push_back(id);
  }

  bool any = false;
  for (const auto& t : meta.topics) {
    if (t.message_count == 0) {
      continue;
    }
    meta.start_timestamp = any ? std::min(meta.start_timestamp, t.first_timestamp) : t.first_timestamp;
    meta.end_timestamp = any ? std::max(meta.end_timestamp, t.last_timestamp) : t.last_timestamp;
    any = true;
  }
  fs::remove(layout::metadata_path(root).string() + ".tmp");
  write_metadata(root, meta);
  report.metadata = meta;
  return report;
}

void verify_container(const fs::path& root) {
  const ContainerMetadata meta = read_metadata(root);
  recover_index(layout::index_path(root), false);

  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      throw Error(ErrorCode::kCorruptMetadata, "nested directory in container: " + entry.path().string());
    }
  }

  TimeIndexReader reader(layout::index_path(root), TimeIndexReader::Access::kPread);
  const IndexHeader snap = reader.snapshot();
  std::vector<std::vector<IndexEntry>> per_topic(meta.topics.size());
  for (const auto& e : reader.entries(snap)) {
    if (e.key.topic_id >= per_topic.size()) {
      throw Error(ErrorCode::kCorruptIndex, "index entry for unknown topic");
    }
    per_topic[e.key.topic_id].push_back(e);
  }

  ContainerReader bricks(root);
  for (const auto& t : meta.topics) {
    const auto& brick = bricks.brick(t.id);
    const auto records = brick.read_sequential(0, brick.size());
    const auto& entries = per_topic[t.id];
    if (records.size() != t.message_count || entries.size() != records.size()) {
      throw Error(ErrorCode::kCorruptMetadata,
                  "topic " + t.name + ": metadata count " + std::to_string(t.message_count) + ", frames " +
                      std::to_string(records.size()) + ", index entries " + std::to_string(entries.size()));
    }
    uint64_t bytes = 0;
    for (size_t i = 0; i < records.size(); ++i) {
      if (i > 0 && records[i].timestamp < records[i - 1].timestamp) {
        throw Error(ErrorCode::kCorruptRecord, "timestamps regress in brick of " + t.name, records[i].offset);
      }
      if (entries[i].offset != records[i].offset || entries[i].key.timestamp != records[i].timestamp) {
        throw Error(ErrorCode::kCorruptIndex, "index entry does not match frame in " + t.name,
                    records[i].offset);
      }
      bytes += records[i].payload.size();
    }
    if (bytes != t.payload_bytes) {
      throw Error(ErrorCode::kCorruptMetadata, "payload byte count mismatch for " + t.name);
    }
  }
}

}  // namespace brickstore
