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

#include "brickstore/topic_table.hpp"

#include <mutex>

#include "brickstore/error.hpp"

namespace brickstore {

TopicTable::TopicTable(std::filesystem::path root, const ContainerMetadata& meta) : root_(std::move(root)) {
  for (const auto& t : meta.topics) {
    const auto reg = register_topic(t.name, t.type);
    if (reg.id != t.id || !reg.created) {
      throw Error(ErrorCode::kCorruptMetadata, "duplicate or out-of-order topic " + t.name);
    }
  }
}

TopicTable::Registration TopicTable::register_topic(std::string_view name, std::string_view message_type) {
  validate_topic_name(name);
  std::unique_lock lock(mu_);
  if (auto it = name_to_id_.find(name); it != name_to_id_.end()) {
    return {it->second, false};
  }
  const auto id = static_cast<uint32_t>(names_.size());
  name_to_id_.emplace(std::string(name), id);
  names_.emplace_back(name);
  types_.emplace_back(message_type);
  paths_.push_back(layout::brick_path(root_, id));
  return {id, true};
}

std::optional<uint32_t> TopicTable::find(std::string_view name) const {
  std::shared_lock lock(mu_);
  if (auto it = name_to_id_.find(name); it != name_to_id_.end()) {
    return it->second;
  }
  return std::nullopt;
}

uint32_t TopicTable::lookup(std::string_view name) const {
  if (auto id = find(name)) {
    return *id;
  }
  throw Error(ErrorCode::kUnknownTopic, "unknown topic " + std::string(name));
}

const std::string& TopicTable::name_of(uint32_t id) const {
  std::shared_lock lock(mu_);
  if (id >= names_.size()) {
    throw Error(ErrorCode::kUnknownTopic, "unknown topic id " + std::to_string(id));
  }
  return names_[id];
}

const std::string& TopicTable::type_of(uint32_t id) const {
  std::shared_lock lock(mu_);
  if (id >= types_.size()) {
    throw Error(ErrorCode::kUnknownTopic, "unknown topic id " + std::to_string(id));
  }
  return types_[id];
}

std::filesystem::path TopicTable::lookup_path(uint32_t id) const {
  std::shared_lock lock(mu_);
  if (id >= paths_.size()) {
    throw Error(ErrorCode::kUnknownTopic, "unknown topic id " + std::to_string(id));
  }
  return paths_[id];
}

size_t TopicTable::size() const {
  std::shared_lock lock(mu_);
  return names_.size();
}

std::vector<std::string> TopicTable::names() const {
  std::shared_lock lock(mu_);
  return {names_.begin(), names_.end()};
}

}  // namespace brickstore
