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

#include "brickstore/bag.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

#include "brickstore/error.hpp"

namespace brickstore {

namespace bag {

uint64_t decode_time(ByteView field) {
  if (field.size() != 8) {
    throw Error(ErrorCode::kCorruptBag, "time field is not 8 bytes");
  }
  const uint32_t sec = load_le<uint32_t>(field.data());
  const uint32_t nsec = load_le<uint32_t>(field.data() + 4);
  if (nsec >= kNanosPerSecond) {
    throw Error(ErrorCode::kCorruptBag, fmt::format("time nsec {} out of range", nsec));
  }
  return uint64_t{sec} * kNanosPerSecond + nsec;
}

void encode_time(Bytes& out, uint64_t ns) {
  const uint64_t sec = ns / kNanosPerSecond;
  if (sec > UINT32_MAX) {
    throw Error(ErrorCode::kInvalidMessage, "timestamp beyond ROS time range");
  }
  put_le<uint32_t>(out, static_cast<uint32_t>(sec));
  put_le<uint32_t>(out, static_cast<uint32_t>(ns % kNanosPerSecond));
}

std::map<std::string, Bytes, std::less<>> parse_header_fields(ByteView header, uint64_t base_offset) {
  std::map<std::string, Bytes, std::less<>> fields;
  size_t pos = 0;
  while (pos < header.size()) {
    if (header.size() - pos < 4) {
      throw Error(ErrorCode::kCorruptBag, "truncated header field length", base_offset + pos);
    }
    const uint32_t len = load_le<uint32_t>(header.data() + pos);
    pos += 4;
    if (len > header.size() - pos) {
      throw Error(ErrorCode::kCorruptBag, "header field runs past its header", base_offset + pos);
    }
    const auto field = header.subspan(pos, len);
    const auto eq = std::find(field.begin(), field.end(), uint8_t{'='});
    if (eq == field.end()) {
      throw Error(ErrorCode::kCorruptBag, "header field without '='", base_offset + pos);
    }
    std::string name(field.begin(), eq);
    fields.insert_or_assign(std::move(name), Bytes(eq + 1, field.end()));
    pos += len;
  }
  return fields;
}

Bytes encode_header_fields(const std::vector<std::pair<std::string, Bytes>>& fields) {
  Bytes out;
  for (const auto& [name, value] : fields) {
    put_le<uint32_t>(out, static_cast<uint32_t>(name.size() + 1 + value.size()));
    put_bytes(out, name);
    out.push_back('=');
    put_bytes(out, value);
  }
  return out;
}

}  // namespace bag

namespace {

class FileSource : public BagByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path) : file_(path, File::Mode::kRead), size_(file_.size()) {}
  uint64_t size() const override { return size_; }
  void read(uint64_t offset, std::span<uint8_t> dst) const override {
    if (offset > size_ || dst.size() > size_ - offset) {
      throw Error(ErrorCode::kCorruptBag, fmt::format("record runs past end of file at {}", offset), offset);
    }
    file_.pread_exact(dst, offset);
  }

 private:
  File file_;
  uint64_t size_;
};

class SpanSource : public BagByteSource {
 public:
  SpanSource(ByteView bytes, uint64_t base) : bytes_(bytes), base_(base) {}
  uint64_t size() const override { return bytes_.size(); }
  void read(uint64_t offset, std::span<uint8_t> dst) const override {
    if (offset > bytes_.size() || dst.size() > bytes_.size() - offset) {
      throw Error(ErrorCode::kCorruptBag, fmt::format("record truncated at {}", base_ + offset), base_ + offset);
    }
    if (!dst.empty()) {
      std::memcpy(dst.data(), bytes_.data() + offset, dst.size());
    }
  }

 private:
  ByteView bytes_;
  uint64_t base_;
};

class MemorySource : public BagByteSource {
 public:
  explicit MemorySource(Bytes bytes) : bytes_(std::move(bytes)), view_(bytes_, 0) {}
  uint64_t size() const override { return bytes_.size(); }
  void read(uint64_t offset, std::span<uint8_t> dst) const override { view_.read(offset, dst); }

 private:
  Bytes bytes_;
  SpanSource view_;
};

// Parses one record at `offset` of `src`, which must end by `limit`.
// `base` shifts reported offsets to file positions.
bag::Record parse_record(const BagByteSource& src, uint64_t offset, uint64_t limit, uint64_t base,
                         uint64_t* next) {
  auto corrupt = [&](const std::string& what, uint64_t at) {
    return Error(ErrorCode::kCorruptBag, fmt::format("{} at offset {}", what, base + at), base + at);
  };
  if (limit < offset || limit - offset < 4) {
    throw corrupt("truncated record header length", offset);
  }
  uint8_t len_buf[4];
  src.read(offset, len_buf);
  const uint32_t header_len = load_le<uint32_t>(len_buf);
  if (header_len > limit - offset - 4) {
    throw corrupt("record header runs past end", offset);
  }
  Bytes header(header_len);
  src.read(offset + 4, header);
  const uint64_t data_len_at = offset + 4 + header_len;
  if (limit - data_len_at < 4) {
    throw corrupt("truncated record data length", data_len_at);
  }
  src.read(data_len_at, len_buf);
  const uint32_t data_len = load_le<uint32_t>(len_buf);
  if (data_len > limit - data_len_at - 4) {
    throw corrupt("record data runs past end", data_len_at);
  }
  bag::Record rec;
  rec.offset = base + offset;
  rec.header = bag::parse_header_fields(header, base + offset + 4);
  const auto op = rec.header.find("op");
  if (op == rec.header.end() || op->second.size() != 1) {
    throw corrupt("record without a one-byte op field", offset);
  }
  rec.op = static_cast<bag::Op>(op->second[0]);
  rec.data.resize(data_len);
  src.read(data_len_at + 4, rec.data);
  *next = data_len_at + 4 + data_len;
  return rec;
}

const Bytes& require_field(const bag::Record& rec, std::string_view name) {
  const auto it = rec.header.find(name);
  if (it == rec.header.end()) {
    throw Error(ErrorCode::kCorruptBag, fmt::format("record at {} lacks field '{}'", rec.offset, name), rec.offset);
  }
  return it->second;
}

template <typename T>
T field_le(const bag::Record& rec, std::string_view name) {
  const Bytes& v = require_field(rec, name);
  if (v.size() != sizeof(T)) {
    throw Error(ErrorCode::kCorruptBag,
                fmt::format("field '{}' of record at {} has {} bytes, want {}", name, rec.offset, v.size(), sizeof(T)),
                rec.offset);
  }
  return load_le<T>(v.data());
}

std::string field_string(const std::map<std::string, Bytes, std::less<>>& fields, std::string_view name) {
  const auto it = fields.find(name);
  return it == fields.end() ? std::string{} : std::string(it->second.begin(), it->second.end());
}

Bytes str_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

template <typename T>
Bytes le_bytes(T v) {
  Bytes b;
  put_le<T>(b, v);
  return b;
}

Bytes time_bytes(uint64_t ns) {
  Bytes b;
  bag::encode_time(b, ns);
  return b;
}

}  // namespace

BagReader::BagReader(std::unique_ptr<BagByteSource> source) : source_(std::move(source)) {}

std::unique_ptr<BagReader> BagReader::open_file(const std::filesystem::path& path) {
  std::unique_ptr<BagReader> r(new BagReader(std::make_unique<FileSource>(path)));
  r->open();
  return r;
}

std::unique_ptr<BagReader> BagReader::open_memory(Bytes bytes) {
  std::unique_ptr<BagReader> r(new BagReader(std::make_unique<MemorySource>(std::move(bytes))));
  r->open();
  return r;
}

void BagReader::open() {
  const uint64_t size = source_->size();
  if (size < bag::kMagic.size()) {
    throw Error(ErrorCode::kNotABag, "file too short for a bag version line", 0);
  }
  Bytes magic(bag::kMagic.size());
  source_->read(0, magic);
  if (!std::equal(magic.begin(), magic.end(), bag::kMagic.begin())) {
    throw Error(ErrorCode::kNotABag, "missing '#ROSBAG V2.0' version line", 0);
  }
  uint64_t next = 0;
  const auto head = parse_record(*source_, bag::kMagic.size(), size, 0, &next);
  if (head.op != bag::Op::kBagHeader) {
    throw Error(ErrorCode::kCorruptBag, "first record is not a bag header", head.offset);
  }
  header_.index_pos = field_le<uint64_t>(head, "index_pos");
  header_.conn_count = field_le<uint32_t>(head, "conn_count");
  header_.chunk_count = field_le<uint32_t>(head, "chunk_count");
  pos_ = next;
  end_ = size;
  if (header_.index_pos >= next && header_.index_pos < size) {
    end_ = header_.index_pos;
    // Connection table from the index section, so message records can be
    // resolved even when their chunk does not repeat the connection.
    for (uint64_t at = header_.index_pos; at < size;) {
      const auto rec = parse_record(*source_, at, size, 0, &at);
      if (rec.op == bag::Op::kConnection) {
        add_connection(rec);
      } else if (rec.op != bag::Op::kChunkInfo) {
        throw Error(ErrorCode::kCorruptBag, fmt::format("unexpected op {} in index section",
                                                        static_cast<int>(rec.op)), rec.offset);
      }
    }
  } else if (header_.index_pos != 0) {
    throw Error(ErrorCode::kCorruptBag, fmt::format("index_pos {} outside file", header_.index_pos), 0);
  }
}

void BagReader::add_connection(const bag::Record& rec) {
  bag::Connection c;
  c.id = field_le<uint32_t>(rec, "conn");
  const Bytes& topic = require_field(rec, "topic");
  c.topic.assign(topic.begin(), topic.end());
  const auto fields = bag::parse_header_fields(rec.data, rec.offset);
  c.type = field_string(fields, "type");
  c.md5sum = field_string(fields, "md5sum");
  c.definition = field_string(fields, "message_definition");
  if (c.topic.empty()) {
    throw Error(ErrorCode::kCorruptBag, "connection with an empty topic", rec.offset);
  }
  connections_.try_emplace(c.id, std::move(c));
}

std::optional<Message> BagReader::to_message(const bag::Record& rec) const {
  const uint32_t conn = field_le<uint32_t>(rec, "conn");
  const auto it = connections_.find(conn);
  if (it == connections_.end()) {
    throw Error(ErrorCode::kCorruptBag, fmt::format("message refers to unknown connection {}", conn), rec.offset);
  }
  const uint64_t ts = bag::decode_time(require_field(rec, "time"));
  return Message{ts, it->second.topic, rec.data};
}

std::optional<Message> BagReader::next() {
  while (true) {
    if (in_chunk_) {
      if (chunk_pos_ >= chunk_.size()) {
        in_chunk_ = false;
        continue;
      }
      SpanSource src(chunk_, chunk_base_);
      auto rec = parse_record(src, chunk_pos_, chunk_.size(), chunk_base_, &chunk_pos_);
      switch (rec.op) {
        case bag::Op::kConnection:
          add_connection(rec);
          break;
        case bag::Op::kMessageData:
          ++messages_read_;
          return to_message(rec);
        default:
          throw Error(ErrorCode::kCorruptBag,
                      fmt::format("op {} not allowed inside a chunk", static_cast<int>(rec.op)), rec.offset);
      }
      continue;
    }
    if (pos_ >= end_) {
      return std::nullopt;
    }
    auto rec = parse_record(*source_, pos_, end_, 0, &pos_);
    switch (rec.op) {
      case bag::Op::kChunk: {
        const Bytes& compression = require_field(rec, "compression");
        if (std::string_view(reinterpret_cast<const char*>(compression.data()), compression.size()) != "none") {
          throw Error(ErrorCode::kUnsupportedCompression,
                      fmt::format("chunk at {} uses compression '{}'", rec.offset,
                                  std::string(compression.begin(), compression.end())),
                      rec.offset);
        }
        const uint32_t size = field_le<uint32_t>(rec, "size");
        if (size != rec.data.size()) {
          throw Error(ErrorCode::kCorruptBag,
                      fmt::format("chunk at {} claims {} bytes, holds {}", rec.offset, size, rec.data.size()),
                      rec.offset);
        }
        chunk_ = std::move(rec.data);
        chunk_base_ = pos_ - chunk_.size();
        chunk_pos_ = 0;
        in_chunk_ = true;
        break;
      }
      case bag::Op::kConnection:
        add_connection(rec);
        break;
      case bag::Op::kMessageData:
        ++messages_read_;
        return to_message(rec);
      case bag::Op::kIndexData:
      case bag::Op::kChunkInfo:
        break;
      default:
        throw Error(ErrorCode::kCorruptBag, fmt::format("unexpected op {}", static_cast<int>(rec.op)),
                    rec.offset);
    }
  }
}

std::string BagReader::message_type(std::string_view topic) const {
  for (const auto& [id, c] : connections_) {
    if (c.topic == topic) {
      return c.type;
    }
  }
  return {};
}

std::vector<bag::Connection> BagReader::connections() const {
  std::vector<bag::Connection> out;
  for (const auto& [id, c] : connections_) {
    out.push_back(c);
  }
  return out;
}

std::vector<Message> read_bag_messages(ByteView bytes) {
  auto reader = BagReader::open_memory(Bytes(bytes.begin(), bytes.end()));
  std::vector<Message> out;
  while (auto m = reader->next()) {
    out.push_back(std::move(*m));
  }
  return out;
}

BagWriter::BagWriter(const std::filesystem::path& path, BagWriterOptions options)
    : file_(path, File::Mode::kCreateTruncate), options_(options) {
  Bytes head;
  put_bytes(head, bag::kMagic);
  file_.pwrite_all(head, 0);
  pos_ = head.size();
  write_bag_header();
  pos_ = bag::kMagic.size() + bag::kBagHeaderPadTo;
}

BagWriter::~BagWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void BagWriter::write_record(Bytes& out, const std::vector<std::pair<std::string, Bytes>>& fields, ByteView data) {
  const Bytes header = bag::encode_header_fields(fields);
  put_le<uint32_t>(out, static_cast<uint32_t>(header.size()));
  put_bytes(out, header);
  put_le<uint32_t>(out, static_cast<uint32_t>(data.size()));
  put_bytes(out, data);
}

void BagWriter::write_connection(Bytes& out, const bag::Connection& c) {
  const Bytes data = bag::encode_header_fields({{"topic", str_bytes(c.topic)},
                                                {"type", str_bytes(c.type)},
                                                {"md5sum", str_bytes(c.md5sum)},
                                                {"message_definition", str_bytes(c.definition)}});
  write_record(out,
               {{"op", Bytes{static_cast<uint8_t>(bag::Op::kConnection)}},
                {"conn", le_bytes<uint32_t>(c.id)},
                {"topic", str_bytes(c.topic)}},
               data);
}

void BagWriter::write_bag_header() {
  const uint64_t index_pos = closed_ ? pos_ : 0;
  const auto fields = std::vector<std::pair<std::string, Bytes>>{
      {"op", Bytes{static_cast<uint8_t>(bag::Op::kBagHeader)}},
      {"index_pos", le_bytes<uint64_t>(index_pos)},
      {"conn_count", le_bytes<uint32_t>(static_cast<uint32_t>(connections_.size()))},
      {"chunk_count", le_bytes<uint32_t>(static_cast<uint32_t>(chunks_.size()))}};
  const size_t header_size = bag::encode_header_fields(fields).size();
  // Pad with spaces so the record fills exactly kBagHeaderPadTo bytes.
  const Bytes padding(bag::kBagHeaderPadTo - 8 - header_size, ' ');
  Bytes out;
  write_record(out, fields, padding);
  file_.pwrite_all(out, bag::kMagic.size());
}

uint32_t BagWriter::add_connection(std::string topic, std::string type, std::string md5sum,
                                   std::string definition) {
  const auto id = static_cast<uint32_t>(connections_.size());
  connections_.push_back(bag::Connection{id, std::move(topic), std::move(type), std::move(md5sum),
                                         std::move(definition)});
  connection_written_.push_back(false);
  return id;
}

void BagWriter::write(uint32_t conn, uint64_t timestamp_ns, ByteView data) {
  if (closed_) {
    throw Error(ErrorCode::kIoError, "bag writer is closed");
  }
  if (conn >= connections_.size()) {
    throw Error(ErrorCode::kUnknownTopic, fmt::format("unknown bag connection {}", conn));
  }
  if (chunk_.empty()) {
    current_ = ChunkStats{pos_, timestamp_ns, timestamp_ns, {}};
  }
  if (!connection_written_[conn]) {
    write_connection(chunk_, connections_[conn]);
    connection_written_[conn] = true;
  }
  const auto offset = static_cast<uint32_t>(chunk_.size());
  write_record(chunk_,
               {{"op", Bytes{static_cast<uint8_t>(bag::Op::kMessageData)}},
                {"conn", le_bytes<uint32_t>(conn)},
                {"time", time_bytes(timestamp_ns)}},
               data);
  chunk_index_[conn].push_back(IndexEntry{timestamp_ns, offset});
  current_.start_time = std::min(current_.start_time, timestamp_ns);
  current_.end_time = std::max(current_.end_time, timestamp_ns);
  ++current_.counts[conn];
  if (chunk_.size() >= options_.chunk_threshold) {
    flush_chunk();
  }
}

void BagWriter::flush_chunk() {
  if (chunk_.empty()) {
    return;
  }
  Bytes out;
  write_record(out,
               {{"op", Bytes{static_cast<uint8_t>(bag::Op::kChunk)}},
                {"compression", str_bytes("none")},
                {"size", le_bytes<uint32_t>(static_cast<uint32_t>(chunk_.size()))}},
               chunk_);
  for (const auto& [conn, entries] : chunk_index_) {
    Bytes data;
    for (const auto& e : entries) {
      bag::encode_time(data, e.time);
      put_le<uint32_t>(data, e.offset);
    }
    write_record(out,
                 {{"op", Bytes{static_cast<uint8_t>(bag::Op::kIndexData)}},
                  {"ver", le_bytes<uint32_t>(1)},
                  {"conn", le_bytes<uint32_t>(conn)},
                  {"count", le_bytes<uint32_t>(static_cast<uint32_t>(entries.size()))}},
                 data);
  }
  file_.pwrite_all(out, pos_);
  pos_ += out.size();
  chunks_.push_back(current_);
  chunk_.clear();
  chunk_index_.clear();
}

void BagWriter::close() {
  if (closed_) {
    return;
  }
  flush_chunk();
  const uint64_t index_pos = pos_;
  Bytes out;
  for (const auto& c : connections_) {
    write_connection(out, c);
  }
  for (const auto& ch : chunks_) {
    Bytes data;
    for (const auto& [conn, count] : ch.counts) {
      put_le<uint32_t>(data, conn);
      put_le<uint32_t>(data, count);
    }
    write_record(out,
                 {{"op", Bytes{static_cast<uint8_t>(bag::Op::kChunkInfo)}},
                  {"ver", le_bytes<uint32_t>(1)},
                  {"chunk_pos", le_bytes<uint64_t>(ch.position)},
                  {"start_time", time_bytes(ch.start_time)},
                  {"end_time", time_bytes(ch.end_time)},
                  {"count", le_bytes<uint32_t>(static_cast<uint32_t>(ch.counts.size()))}},
                 data);
  }
  file_.pwrite_all(out, pos_);
  closed_ = true;
  pos_ = index_pos;
  write_bag_header();
  file_.datasync();
  file_.close();
}

void write_bag(const std::filesystem::path& path, const std::vector<BagMessage>& messages,
               const std::vector<bag::Connection>& connections, BagWriterOptions options) {
  BagWriter writer(path, options);
  std::unordered_map<uint32_t, uint32_t> ids;
  for (const auto& c : connections) {
    ids[c.id] = writer.add_connection(c.topic, c.type, c.md5sum, c.definition);
  }
  for (const auto& m : messages) {
    const auto it = ids.find(m.conn);
    if (it == ids.end()) {
      throw Error(ErrorCode::kUnknownTopic, fmt::format("message refers to unknown connection {}", m.conn));
    }
    writer.write(it->second, m.timestamp, m.data);
  }
  writer.close();
}

ContainerMetadata convert_bag_to_container(const std::filesystem::path& bag_path,
                                           const std::filesystem::path& container_root,
                                           const RecorderOptions& options, RecorderStats* stats) {
  auto reader = BagReader::open_file(bag_path);
  return record(*reader, container_root, options, stats);
}

}  // namespace brickstore
