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

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "brickstore/bag.hpp"
#include "brickstore/error.hpp"
#include "brickstore/query.hpp"

namespace brickstore::cli {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

LatencySummary summarize(std::vector<double> seconds) {
  LatencySummary s;
  s.count = seconds.size();
  if (seconds.empty()) {
    return s;
  }
  std::sort(seconds.begin(), seconds.end());
  auto rank = [&](double p) {
    const auto idx = static_cast<size_t>(std::ceil(p * static_cast<double>(seconds.size())));
    return seconds[std::clamp<size_t>(idx, 1, seconds.size()) - 1] * 1e3;
  };
  s.mean_ms = std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size()) * 1e3;
  s.p50_ms = rank(0.50);
  s.p99_ms = rank(0.99);
  s.max_ms = seconds.back() * 1e3;
  return s;
}

void to_json(nlohmann::json& j, const LatencySummary& s) {
  j = {{"count", s.count}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p99_ms", s.p99_ms}, {"max_ms", s.max_ms}};
}

Durability parse_durability(const std::string& text) {
  if (text == "buffered") {
    return Durability::kBuffered;
  }
  if (text == "range") {
    return Durability::kRangeSync;
  }
  if (text == "paranoid") {
    return Durability::kParanoid;
  }
  throw Error(ErrorCode::kBadParam, "durability must be buffered, range or paranoid");
}

std::string format_bytes(uint64_t bytes) {
  const double b = static_cast<double>(bytes);
  if (b >= 1024.0 * 1024 * 1024) {
    return fmt::format("{:.2f} GiB", b / (1024.0 * 1024 * 1024));
  }
  if (b >= 1024.0 * 1024) {
    return fmt::format("{:.2f} MiB", b / (1024.0 * 1024));
  }
  if (b >= 1024.0) {
    return fmt::format("{:.1f} KiB", b / 1024.0);
  }
  return fmt::format("{} B", bytes);
}

std::string format_time(uint64_t ns) { return fmt::format("{}.{:09d}", ns / kNanosPerSecond, ns % kNanosPerSecond); }

Workload resolve_workload(const std::string& file, const std::string& preset, double duration, uint64_t seed) {
  if (!file.empty()) {
    return load_workload(file);
  }
  return workload_preset(preset.empty() ? "drone" : preset, duration, seed);
}

ContainerMetadata ensure_container(const std::filesystem::path& root, const Workload& w) {
  if (std::filesystem::exists(layout::metadata_path(root))) {
    return read_metadata(root);
  }
  RecorderOptions opts;
  opts.durability = Durability::kBuffered;
  SynthSource src(w);
  return record(src, root, opts);
}

void export_container_to_bag(const std::filesystem::path& root, const std::filesystem::path& bag_path) {
  QueryEngine engine(root);
  const auto meta = engine.metadata();
  BagWriter writer(bag_path);
  std::vector<std::string> names;
  for (const auto& t : meta.topics) {
    writer.add_connection(t.name, t.type);
    names.push_back(t.name);
  }
  // One second at a time keeps memory flat on large containers.
  for (uint64_t lo = meta.start_timestamp; !names.empty() && lo <= meta.end_timestamp;) {
    const uint64_t hi = std::min(meta.end_timestamp, lo + kNanosPerSecond - 1);
    for (const auto& m : engine.history(names, lo, hi).messages) {
      const auto it = std::find(names.begin(), names.end(), m.topic);
      writer.write(static_cast<uint32_t>(it - names.begin()), m.timestamp, m.payload);
    }
    if (hi == meta.end_timestamp) {
      break;
    }
    lo = hi + 1;
  }
  writer.close();
}

nlohmann::json metadata_json(const ContainerMetadata& meta) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : meta.topics) {
    topics.push_back({{"id", t.id},
                      {"name", t.name},
                      {"type", t.type},
                      {"messages", t.message_count},
                      {"bytes", t.payload_bytes},
                      {"first_ns", t.first_timestamp},
                      {"last_ns", t.last_timestamp}});
  }
  return {{"format_version", meta.format_version},
          {"start_ns", meta.start_timestamp},
          {"end_ns", meta.end_timestamp},
          {"messages", meta.message_count()},
          {"topics", topics}};
}

void print_metadata_table(const ContainerMetadata& meta) {
  const double span =
      meta.end_timestamp > meta.start_timestamp
          ? static_cast<double>(meta.end_timestamp - meta.start_timestamp) / static_cast<double>(kNanosPerSecond)
          : 0.0;
  fmt::print("start     {}\nend       {}\nduration  {:.3f} s\nmessages  {}\ntopics    {}\n\n",
             format_time(meta.start_timestamp), format_time(meta.end_timestamp), span, meta.message_count(),
             meta.topic_count());
  fmt::print("{:>3}  {:<36} {:<28} {:>10} {:>12} {:>10}\n", "id", "topic", "type", "messages", "bytes", "rate Hz");
  for (const auto& t : meta.topics) {
    const double tspan = static_cast<double>(t.last_timestamp - t.first_timestamp) / 1e9;
    const double rate = t.message_count > 1 && tspan > 0 ? static_cast<double>(t.message_count - 1) / tspan : 0.0;
    fmt::print("{:>3}  {:<36} {:<28} {:>10} {:>12} {:>10.1f}\n", t.id, t.name, t.type, t.message_count,
               format_bytes(t.payload_bytes), rate);
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      out.push_back(item);
    }
    if (comma == std::string::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace brickstore::cli
