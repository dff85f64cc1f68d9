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

#include "brickstore/container.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <sstream>

#include "brickstore/error.hpp"
#include "brickstore/time_index.hpp"

namespace brickstore {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMetadataMagic = "BRICKSTORE-METADATA";
constexpr size_t kReadChunk = 1 << 20;

[[noreturn]] void corrupt_metadata(const std::string& what) {
  throw Error(ErrorCode::kCorruptMetadata, "metadata: " + what);
}

uint64_t parse_u64(std::string_view key, std::string_view value) {
  uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    corrupt_metadata("bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

}  // namespace

uint64_t ContainerMetadata::message_count() const {
  uint64_t n = 0;
  for (const auto& t : topics) {
    n += t.message_count;
  }
  return n;
}

namespace layout {
fs::path metadata_path(const fs::path& root) { return root / kMetadataFile; }
fs::path index_path(const fs::path& root) { return root / kIndexFile; }
fs::path brick_path(const fs::path& root, uint32_t topic_id) {
  return root / (std::to_string(topic_id) + ".brick");
}
}  // namespace layout

void validate_topic_name(std::string_view name) {
  if (name.empty()) {
    throw Error(ErrorCode::kInvalidMessage, "empty topic name");
  }
  for (const char c : name) {
    if (c == '\n' || c == '\r' || c == '\0') {
      throw Error(ErrorCode::kInvalidMessage, "topic name contains a control character");
    }
  }
}

std::string encode_metadata(const ContainerMetadata& meta) {
  std::ostringstream out;
  out << kMetadataMagic << ' ' << meta.format_version << '\n';
  out << "format_version=" << meta.format_version << '\n';
  out << "topic_count=" << meta.topics.size() << '\n';
  out << "start_timestamp=" << meta.start_timestamp << '\n';
  out << "end_timestamp=" << meta.end_timestamp << '\n';
  for (const auto& t : meta.topics) {
    const std::string p = "topic." + std::to_string(t.id) + ".";
    out << p << "name=" << t.name << '\n';
    out << p << "type=" << t.type << '\n';
    out << p << "message_count=" << t.message_count << '\n';
    out << p << "payload_bytes=" << t.payload_bytes << '\n';
    out << p << "first_timestamp=" << t.first_timestamp << '\n';
    out << p << "last_timestamp=" << t.last_timestamp << '\n';
  }
  return out.str();
}

ContainerMetadata decode_metadata(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      corrupt_metadata("missing trailing newline");
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) {
    corrupt_metadata("empty file");
  }
  const std::string header = std::string(kMetadataMagic) + " " + std::to_string(kContainerFormatVersion);
  if (lines[0] != header) {
    corrupt_metadata("bad header line");
  }

  std::map<std::string, std::string, std::less<>> kv;
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      corrupt_metadata("line " + std::to_string(i + 1) + " is not key=value");
    }
    auto [it, inserted] = kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    if (!inserted) {
      corrupt_metadata("duplicate key " + it->first);
    }
  }

  auto take = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) {
      corrupt_metadata("missing key " + key);
    }
    std::string v = std::move(it->second);
    kv.erase(it);
    return v;
  };

  ContainerMetadata meta;
  const auto version = parse_u64("format_version", take("format_version"));
  if (version != kContainerFormatVersion) {
    corrupt_metadata("unsupported format_version " + std::to_string(version));
  }
  meta.format_version = static_cast<uint32_t>(version);
  const auto count = parse_u64("topic_count", take("topic_count"));
  if (count > std::numeric_limits<uint32_t>::max()) {
    corrupt_metadata("topic_count out of range");
  }
  meta.start_timestamp = parse_u64("start_timestamp", take("start_timestamp"));
  meta.end_timestamp = parse_u64("end_timestamp", take("end_timestamp"));
  meta.topics.reserve(count);
  for (uint32_t id = 0; id < count; ++id) {
    const std::string p = "topic." + std::to_string(id) + ".";
    TopicInfo t;
    t.id = id;
    t.name = take(p + "name");
    t.type = take(p + "type");
    t.message_count = parse_u64("message_count", take(p + "message_count"));
    t.payload_bytes = parse_u64("payload_bytes", take(p + "payload_bytes"));
    t.first_timestamp = parse_u64("first_timestamp", take(p + "first_timestamp"));
    t.last_timestamp = parse_u64("last_timestamp", take(p + "last_timestamp"));
    if (t.name.empty()) {
      corrupt_metadata("empty topic name for id " + std::to_string(id));
    }
    meta.topics.push_back(std::move(t));
  }
  if (!kv.empty()) {
    corrupt_metadata("unexpected key " + kv.begin()->first);
  }
  if (meta.start_timestamp > meta.end_timestamp) {
    corrupt_metadata("start_timestamp after end_timestamp");
  }
  return meta;
}

ContainerMetadata read_metadata(const fs::path& root) {
  const auto path = layout::metadata_path(root);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kCorruptMetadata, "no metadata file in " + root.string());
  }
  return decode_metadata(read_file(path));
}

void write_metadata(const fs::path& root, const ContainerMetadata& meta) {
  for (const auto& t : meta.topics) {
    validate_topic_name(t.name);
  }
  write_file_atomic(layout::metadata_path(root), encode_metadata(meta));
}

// ---------------------------------------------------------------- bricks

BrickWriter::BrickWriter(const fs::path& path, bool create)
    : file_(path, create ? File::Mode::kCreateNew : File::Mode::kReadWrite) {
  size_ = file_.size();
  synced_ = size_;
}

uint64_t BrickWriter::append(uint64_t timestamp, ByteView payload) {
  if (timestamp < last_timestamp_) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "timestamp " + std::to_string(timestamp) + " precedes " +
                    std::to_string(last_timestamp_) + " in " + file_.path().string());
  }
  if (payload.size() > std::numeric_limits<uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidMessage, "payload exceeds 4 GiB");
  }
  uint8_t header[kFrameHeaderSize];
  store_le<uint32_t>(header, static_cast<uint32_t>(payload.size()));
  store_le<uint64_t>(header + 4, timestamp);
  const ByteView parts[] = {ByteView(header, kFrameHeaderSize), payload};
  const uint64_t offset = size();
  file_.pwritev_all(parts, offset);
  size_.store(offset + kFrameHeaderSize + payload.size(), std::memory_order_release);
  last_timestamp_ = timestamp;
  return offset;
}

bool BrickWriter::sync() {
  std::lock_guard lock(sync_mu_);
  const uint64_t target = size();
  if (synced_ == target) {
    return false;
  }
  file_.sync_range(synced_, target - synced_);
  synced_ = target;
  return true;
}

BrickReader::BrickReader(const fs::path& path) : file_(path, File::Mode::kRead) {}

uint64_t BrickReader::record_end(uint64_t offset) const {
  const uint64_t size = file_.size();
  if (offset >= size) {
    throw Error(ErrorCode::kOutOfBounds,
                "offset " + std::to_string(offset) + " past end of " + file_.path().string(), offset);
  }
  uint8_t header[kFrameHeaderSize];
  if (file_.pread_some(header, offset) != kFrameHeaderSize) {
    throw Error(ErrorCode::kCorruptRecord, "truncated frame header", offset);
  }
  const uint64_t end = offset + kFrameHeaderSize + load_le<uint32_t>(header);
  if (end > size) {
    throw Error(ErrorCode::kCorruptRecord, "frame overruns " + file_.path().string(), offset);
  }
  return end;
}

Record BrickReader::read_record_at(uint64_t offset) const {
  const uint64_t end = record_end(offset);
  Record rec;
  rec.offset = offset;
  uint8_t ts[8];
  file_.pread_exact(ts, offset + 4);
  rec.timestamp = load_le<uint64_t>(ts);
  rec.payload.resize(end - offset - kFrameHeaderSize);
  file_.pread_exact(rec.payload, offset + kFrameHeaderSize);
  return rec;
}

std::vector<Record> BrickReader::read_sequential(uint64_t start_offset, uint64_t end_offset) const {
  std::vector<Record> out;
  if (start_offset > end_offset) {
    throw Error(ErrorCode::kInvalidRange, "start offset after end offset");
  }
  if (start_offset == end_offset) {
    return out;
  }
  if (end_offset > file_.size()) {
    throw Error(ErrorCode::kOutOfBounds,
                "end offset " + std::to_string(end_offset) + " past end of " + file_.path().string(),
                end_offset);
  }

  // Windowed read: small frames are parsed out of a shared buffer, frames
  // larger than the window are read straight into their payload.
  Bytes window;
  uint64_t window_start = start_offset;
  uint64_t pos = start_offset;
  auto fill = [&](uint64_t at) {
    const uint64_t len = std::min<uint64_t>(kReadChunk, end_offset - at);
    window.resize(len);
    file_.pread_exact(window, at);
    window_start = at;
  };
  fill(pos);
  while (pos < end_offset) {
    if (end_offset - pos < kFrameHeaderSize) {
      throw Error(ErrorCode::kCorruptRecord, "partial frame header before end offset", pos);
    }
    if (pos + kFrameHeaderSize > window_start + window.size()) {
      fill(pos);
    }
    const uint8_t* h = window.data() + (pos - window_start);
    Record rec;
    rec.offset = pos;
    const uint32_t len = load_le<uint32_t>(h);
    rec.timestamp = load_le<uint64_t>(h + 4);
    const uint64_t body = pos + kFrameHeaderSize;
    const uint64_t next = body + len;
    if (next > end_offset) {
      throw Error(ErrorCode::kCorruptRecord, "frame overruns requested range", pos);
    }
    rec.payload.resize(len);
    if (next <= window_start + window.size()) {
      std::copy_n(window.data() + (body - window_start), len, rec.payload.begin());
    } else if (len >= kReadChunk / 2) {
      file_.pread_exact(rec.payload, body);
    } else {
      fill(body);
      std::copy_n(window.data(), len, rec.payload.begin());
    }
    out.push_back(std::move(rec));
    pos = next;
  }
  return out;
}

// ---------------------------------------------------------------- container

ContainerWriter ContainerWriter::create(const fs::path& root) {
  std::error_code ec;
  if (fs::exists(root, ec)) {
    if (!fs::is_directory(root) || !fs::is_empty(root)) {
      throw Error(ErrorCode::kAlreadyExists, "container path exists and is not empty: " + root.string());
    }
  } else if (!fs::create_directories(root, ec) && ec) {
    throw Error(ErrorCode::kIoError, "create " + root.string() + ": " + ec.message());
  }
  ContainerWriter writer(root);
  writer.write_metadata(ContainerMetadata{});
  TimeIndexWriter::initialize(layout::index_path(root));
  return writer;
}

void ContainerWriter::add_brick(uint32_t topic_id) {
  std::unique_lock lock(*bricks_mu_);
  if (topic_id != bricks_.size()) {
    throw Error(ErrorCode::kInternal, "brick ids must be dense; expected " + std::to_string(bricks_.size()));
  }
  bricks_.push_back(std::make_unique<BrickWriter>(layout::brick_path(root_, topic_id), true));
}

size_t ContainerWriter::brick_count() const {
  std::shared_lock lock(*bricks_mu_);
  return bricks_.size();
}

BrickWriter& ContainerWriter::brick(uint32_t topic_id) {
  std::shared_lock lock(*bricks_mu_);
  if (topic_id >= bricks_.size()) {
    throw Error(ErrorCode::kUnknownTopic, "unregistered topic id " + std::to_string(topic_id));
  }
  return *bricks_[topic_id];
}

const BrickWriter& ContainerWriter::brick(uint32_t topic_id) const {
  return const_cast<ContainerWriter*>(this)->brick(topic_id);
}

uint64_t ContainerWriter::append_record(uint32_t topic_id, const Message& msg) {
  if (msg.timestamp == 0) {
    throw Error(ErrorCode::kInvalidMessage, "timestamp must be positive");
  }
  return brick(topic_id).append(msg.timestamp, msg.payload);
}

uint64_t ContainerWriter::brick_size(uint32_t topic_id) const { return brick(topic_id).size(); }

size_t ContainerWriter::sync_bricks() {
  std::vector<BrickWriter*> bricks;
  {
    std::shared_lock lock(*bricks_mu_);
    for (auto& b : bricks_) {
      bricks.push_back(b.get());
    }
  }
  size_t n = 0;
  for (auto* b : bricks) {
    n += b->sync() ? 1 : 0;
  }
  return n;
}

void ContainerWriter::sync_brick(uint32_t topic_id) { brick(topic_id).sync(); }

void ContainerWriter::write_metadata(const ContainerMetadata& meta) { brickstore::write_metadata(root_, meta); }

ContainerReader::ContainerReader(fs::path root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) {
    throw Error(ErrorCode::kIoError, "not a container directory: " + root_.string());
  }
}

const BrickReader& ContainerReader::brick(uint32_t topic_id) const {
  std::lock_guard lock(mu_);
  if (topic_id >= bricks_.size()) {
    bricks_.resize(topic_id + 1);
  }
  if (!bricks_[topic_id]) {
    const auto path = layout::brick_path(root_, topic_id);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::kUnknownTopic, "no brick for topic id " + std::to_string(topic_id));
    }
    bricks_[topic_id] = std::make_unique<BrickReader>(path);
  }
  return *bricks_[topic_id];
}

}  // namespace brickstore
