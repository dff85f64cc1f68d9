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
#include <deque>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "brickstore/container.hpp"

namespace brickstore {

// Topic name <-> id and id -> brick path lookups. Ids are dense and handed
// out in first-seen order. Reads may run concurrently with registration.
class TopicTable {
 public:
  explicit TopicTable(std::filesystem::path root) : root_(std::move(root)) {}

  // Rebuilds the table from container metadata (id order preserved).
  TopicTable(std::filesystem::path root, const ContainerMetadata& meta);

  struct Registration {
    uint32_t id;
    bool created;
  };
  // Idempotent; an existing name keeps its id (and its original type).
  Registration register_topic(std::string_view name, std::string_view message_type);

  uint32_t lookup(std::string_view name) const;
  std::optional<uint32_t> find(std::string_view name) const;
  const std::string& name_of(uint32_t id) const;
  const std::string& type_of(uint32_t id) const;
  std::filesystem::path lookup_path(uint32_t id) const;
  size_t size() const;
  std::vector<std::string> names() const;

 private:
  struct StringHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, uint32_t, StringHash, std::equal_to<>> name_to_id_;
  // deque: references handed out by name_of/type_of survive later registrations.
  std::deque<std::string> names_;
  std::deque<std::string> types_;
  std::vector<std::filesystem::path> paths_;
};

}  // namespace brickstore
