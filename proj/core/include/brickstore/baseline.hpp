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
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "brickstore/bag.hpp"

namespace brickstore {

// Comparator for offline queries: a single-file chunked log (bag layout)
// read the way bag tooling reads it. open() walks the chunk-info records and
// every per-chunk index record to build the full in-memory index before the
// first message can be served; reads load whole chunks.
class IndexAtOpenLog {
 public:
  static IndexAtOpenLog open(const std::filesystem::path& path);

  std::vector<Message> read(std::string_view topic, uint64_t start_ns = 0,
                            uint64_t end_ns = std::numeric_limits<uint64_t>::max()) const;

  size_t index_entries() const { return entries_; }
  size_t chunk_count() const { return chunks_.size(); }

 private:
  struct Entry {
    uint64_t time;
    uint32_t chunk;   // position in chunks_
    uint32_t offset;  // record offset inside the chunk payload
  };
  struct Chunk {
    uint64_t data_pos;  // file offset of the chunk payload
    uint32_t data_len;
  };

  IndexAtOpenLog() = default;

  File file_;
  std::vector<Chunk> chunks_;
  std::map<std::string, std::vector<Entry>, std::less<>> by_topic_;
  size_t entries_ = 0;
};

}  // namespace brickstore
