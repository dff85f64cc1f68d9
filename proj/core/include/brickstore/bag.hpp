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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "brickstore/io.hpp"
#include "brickstore/recorder.hpp"

namespace brickstore {

// ROS bag v2.0, uncompressed chunks only.
namespace bag {

inline constexpr std::string_view kMagic = "#ROSBAG V2.0\n";
inline constexpr size_t kBagHeaderPadTo = 4096;

enum class Op : uint8_t {
  kMessageData = 0x02,
  kBagHeader = 0x03,
  kIndexData = 0x04,
  kChunk = 0x05,
  kChunkInfo = 0x06,
  kConnection = 0x07,
};

struct Record {
  Op op = Op::kMessageData;
  std::map<std::string, Bytes, std::less<>> header;
  Bytes data;
  uint64_t offset = 0;  // of the record in its enclosing buffer or file
};

struct Connection {
  uint32_t id = 0;
  std::string topic;
  std::string type;
  std::string md5sum = "*";
  std::string definition;

  bool operator==(const Connection&) const = default;
};

struct BagHeader {
  uint64_t index_pos = 0;
  uint32_t conn_count = 0;
  uint32_t chunk_count = 0;
};

// ROS time: u32 seconds + u32 nanoseconds, little-endian.
uint64_t decode_time(ByteView field);
void encode_time(Bytes& out, uint64_t ns);

// Header block: sequence of u32 length + "name=value".
std::map<std::string, Bytes, std::less<>> parse_header_fields(ByteView header, uint64_t base_offset);
Bytes encode_header_fields(const std::vector<std::pair<std::string, Bytes>>& fields);

}  // namespace bag

// Random-access byte supplier backing the parser.
class BagByteSource {
 public:
  virtual ~BagByteSource() = default;
  virtual uint64_t size() const = 0;
  // Throws kCorruptBag(offset) when the range runs past the end.
  virtual void read(uint64_t offset, std::span<uint8_t> dst) const = 0;
};

// Yields every message-data record in file order, top-level records and
// chunk contents alike. Index records are read only for their connection
// table; everything else about them is optional.
class BagReader : public MessageSource {
 public:
  static std::unique_ptr<BagReader> open_file(const std::filesystem::path& path);
  static std::unique_ptr<BagReader> open_memory(Bytes bytes);

  std::optional<Message> next() override;
  std::string message_type(std::string_view topic) const override;

  const bag::BagHeader& header() const { return header_; }
  // Connections seen so far, including the end-of-file index section.
  std::vector<bag::Connection> connections() const;
  uint64_t messages_read() const { return messages_read_; }

 private:
  explicit BagReader(std::unique_ptr<BagByteSource> source);
  void open();
  bag::Record read_record(uint64_t offset, uint64_t limit, uint64_t* next) const;
  bool load_next_chunk();
  void add_connection(const bag::Record& rec);
  std::optional<Message> to_message(const bag::Record& rec) const;

  std::unique_ptr<BagByteSource> source_;
  bag::BagHeader header_;
  std::map<uint32_t, bag::Connection> connections_;
  uint64_t pos_ = 0;      // next top-level record
  uint64_t end_ = 0;      // stop before the index section
  Bytes chunk_;           // current chunk payload
  uint64_t chunk_base_ = 0;
  uint64_t chunk_pos_ = 0;
  bool in_chunk_ = false;
  uint64_t messages_read_ = 0;
};

// Reads the whole bag and returns its messages (test helper and fuzz target).
std::vector<Message> read_bag_messages(ByteView bytes);

struct BagWriterOptions {
  size_t chunk_threshold = 768 * 1024;
};

// Emits an uncompressed v2.0 bag with per-chunk index records, a trailing
// connection/chunk-info index section and a back-patched bag header.
class BagWriter {
 public:
  explicit BagWriter(const std::filesystem::path& path, BagWriterOptions options = {});
  ~BagWriter();

  uint32_t add_connection(std::string topic, std::string type, std::string md5sum = "*",
                          std::string definition = {});
  void write(uint32_t conn, uint64_t timestamp_ns, ByteView data);
  void close();

 private:
  struct ChunkStats {
    uint64_t position = 0;
    uint64_t start_time = 0;
    uint64_t end_time = 0;
    std::map<uint32_t, uint32_t> counts;
  };
  struct IndexEntry {
    uint64_t time;
    uint32_t offset;
  };

  void write_record(Bytes& out, const std::vector<std::pair<std::string, Bytes>>& fields, ByteView data);
  void write_connection(Bytes& out, const bag::Connection& c);
  void flush_chunk();
  void write_bag_header();

  File file_;
  uint64_t pos_ = 0;
  BagWriterOptions options_;
  std::vector<bag::Connection> connections_;
  std::vector<bool> connection_written_;
  Bytes chunk_;
  ChunkStats current_;
  std::map<uint32_t, std::vector<IndexEntry>> chunk_index_;
  std::vector<ChunkStats> chunks_;
  bool closed_ = false;
};

struct BagMessage {
  uint32_t conn = 0;
  uint64_t timestamp = 0;
  Bytes data;
};

void write_bag(const std::filesystem::path& path, const std::vector<BagMessage>& messages,
               const std::vector<bag::Connection>& connections, BagWriterOptions options = {});

// Replays a bag through the recorder into a fresh container.
ContainerMetadata convert_bag_to_container(const std::filesystem::path& bag_path,
                                           const std::filesystem::path& container_root,
                                           const RecorderOptions& options = {},
                                           RecorderStats* stats = nullptr);

}  // namespace brickstore
