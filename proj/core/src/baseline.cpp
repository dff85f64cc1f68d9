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

#include "brickstore/baseline.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "brickstore/error.hpp"

namespace brickstore {

namespace {

struct RawRecord {
  std::map<std::string, Bytes, std::less<>> header;
  uint64_t data_pos = 0;
  uint32_t data_len = 0;
  uint64_t next = 0;
};

RawRecord read_raw(const File& file, uint64_t offset) {
  RawRecord r;
  uint8_t len[4];
  file.pread_exact(len, offset);
  Bytes header(load_le<uint32_t>(len));
  file.pread_exact(header, offset + 4);
  r.header = bag::parse_header_fields(header, offset + 4);
  file.pread_exact(len, offset + 4 + header.size());
  r.data_pos = offset + 8 + header.size();
  r.data_len = load_le<uint32_t>(len);
  r.next = r.data_pos + r.data_len;
  return r;
}

uint8_t op_of(const RawRecord& r) {
  const auto it = r.header.find("op");
  if (it == r.header.end() || it->second.size() != 1) {
    throw Error(ErrorCode::kCorruptBag, "record without op");
  }
  return it->second[0];
}

template <typename T>
T field(const std::map<std::string, Bytes, std::less<>>& h, std::string_view name) {
  const auto it = h.find(name);
  if (it == h.end() || it->second.size() != sizeof(T)) {
    throw Error(ErrorCode::kCorruptBag, fmt::format("missing or malformed field '{}'", name));
  }
  return load_le<T>(it->second.data());
}

}  // namespace

IndexAtOpenLog IndexAtOpenLog::open(const std::filesystem::path& path) {
  IndexAtOpenLog log;
  log.file_ = File(path, File::Mode::kRead);
  const uint64_t size = log.file_.size();
  const auto head = read_raw(log.file_, bag::kMagic.size());
  const uint64_t index_pos = field<uint64_t>(head.header, "index_pos");
  if (index_pos == 0 || index_pos >= size) {
    throw Error(ErrorCode::kCorruptBag, "bag has no index section");
  }

  std::map<uint32_t, std::string> topics;
  std::vector<uint64_t> chunk_positions;
  for (uint64_t at = index_pos; at < size;) {
    const auto rec = read_raw(log.file_, at);
    const uint8_t op = op_of(rec);
    if (op == static_cast<uint8_t>(bag::Op::kConnection)) {
      const auto& t = rec.header.at("topic");
      topics[field<uint32_t>(rec.header, "conn")] = std::string(t.begin(), t.end());
    } else if (op == static_cast<uint8_t>(bag::Op::kChunkInfo)) {
      chunk_positions.push_back(field<uint64_t>(rec.header, "chunk_pos"));
    }
    at = rec.next;
  }

  for (const uint64_t pos : chunk_positions) {
    const auto chunk = read_raw(log.file_, pos);
    const auto chunk_id = static_cast<uint32_t>(log.chunks_.size());
    log.chunks_.push_back(Chunk{chunk.data_pos, chunk.data_len});
    for (uint64_t at = chunk.next; at < size;) {
      const auto rec = read_raw(log.file_, at);
      if (op_of(rec) != static_cast<uint8_t>(bag::Op::kIndexData)) {
        break;
      }
      const uint32_t conn = field<uint32_t>(rec.header, "conn");
      const uint32_t count = field<uint32_t>(rec.header, "count");
      if (uint64_t{count} * 12 != rec.data_len) {
        throw Error(ErrorCode::kCorruptBag, "index record size mismatch", at);
      }
      Bytes data(rec.data_len);
      log.file_.pread_exact(data, rec.data_pos);
      auto& list = log.by_topic_[topics.at(conn)];
      for (uint32_t i = 0; i < count; ++i) {
        const uint8_t* e = data.data() + 12 * i;
        list.push_back(Entry{bag::decode_time({e, 8}), chunk_id, load_le<uint32_t>(e + 8)});
      }
      log.entries_ += count;
      at = rec.next;
    }
  }
  for (auto& [topic, list] : log.by_topic_) {
    std::stable_sort(list.begin(), list.end(), [](const Entry& a, const Entry& b) { return a.time < b.time; });
  }
  return log;
}

std::vector<Message> IndexAtOpenLog::read(std::string_view topic, uint64_t start_ns, uint64_t end_ns) const {
  std::vector<Message> out;
  const auto it = by_topic_.find(topic);
  if (it == by_topic_.end()) {
    return out;
  }
  const auto& list = it->second;
  auto first = std::lower_bound(list.begin(), list.end(), start_ns,
                                [](const Entry& e, uint64_t t) { return e.time < t; });
  Bytes buffer;
  uint32_t cached = UINT32_MAX;
  for (auto e = first; e != list.end() && e->time <= end_ns; ++e) {
    if (e->chunk != cached) {
      // Whole-chunk load, as bag readers do for each chunk they touch.
      const auto& c = chunks_[e->chunk];
      buffer.resize(c.data_len);
      file_.pread_exact(buffer, c.data_pos);
      cached = e->chunk;
    }
    const uint8_t* p = buffer.data() + e->offset;
    const uint32_t header_len = load_le<uint32_t>(p);
    const auto header = bag::parse_header_fields({p + 4, header_len}, e->offset);
    const uint32_t data_len = load_le<uint32_t>(p + 4 + header_len);
    const uint8_t* data = p + 8 + header_len;
    out.push_back(Message{bag::decode_time(header.at("time")), std::string(topic), Bytes(data, data + data_len)});
  }
  return out;
}

}  // namespace brickstore
