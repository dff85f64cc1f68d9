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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brickstore/container.hpp"
#include "brickstore/time_index.hpp"
#include "brickstore/topic_table.hpp"

namespace brickstore {

struct QueryStats {
  uint64_t bytes = 0;  // payload bytes returned
  std::chrono::nanoseconds service_time{0};
  // Window actually searched, for latest and auto queries.
  uint64_t time_len_ns = 0;
  // Set when the index had nothing published yet.
  bool stale = false;
  // Watermark of the index snapshot the query ran against.
  std::optional<IndexKey> watermark;
  // Auto queries: the byte budget and whether trimming dropped messages.
  double budget_bytes = 0;
  bool trimmed = false;
};

// Messages grouped by topic in request order, ascending timestamps within a
// topic.
struct QueryResult {
  std::vector<Message> messages;
  QueryStats stats;

  size_t count_for(std::string_view topic) const;
  uint64_t payload_bytes() const;
};

// Link throughput estimate, smoothed with an EWMA over fixed-length samples.
struct BandwidthEstimate {
  double bytes_per_second = 0;
  std::chrono::nanoseconds sample_window{std::chrono::seconds(1)};
  std::chrono::steady_clock::time_point last_updated{};
  uint64_t samples = 0;

  bool has_value() const { return samples > 0; }
  // No sample within two windows.
  bool is_stale(std::chrono::steady_clock::time_point now) const;
};

inline constexpr double kDefaultBandwidthAlpha = 0.3;

// First sample is taken as-is; later ones blend as alpha*observed + (1-alpha)*previous.
BandwidthEstimate update_bandwidth(BandwidthEstimate previous, uint64_t bytes_transferred,
                                   std::chrono::nanoseconds elapsed,
                                   std::chrono::steady_clock::time_point now,
                                   double alpha = kDefaultBandwidthAlpha);

// Thread-safe holder around update_bandwidth.
class BandwidthMonitor {
 public:
  explicit BandwidthMonitor(double alpha = kDefaultBandwidthAlpha,
                            std::chrono::nanoseconds window = std::chrono::seconds(1));

  void record(uint64_t bytes, std::chrono::nanoseconds elapsed);
  void reset();
  BandwidthEstimate estimate() const;

 private:
  double alpha_;
  mutable std::mutex mu_;
  BandwidthEstimate estimate_;
};

struct AutoQueryOptions {
  // Shortest window an auto query will search.
  uint64_t min_time_len_ns = 1'000'000;  // 1 ms
};

// Read path over one container. Safe for concurrent queries; the container
// may still be recording.
class QueryEngine {
 public:
  explicit QueryEngine(const std::filesystem::path& root,
                       TimeIndexReader::Access access = TimeIndexReader::Access::kMmap);

  // Window (watermark - time_len, watermark].
  QueryResult latest(std::span<const std::string> topics, uint64_t time_len_ns) const;
  // Closed range [start, end]. Throws kInvalidRange when start > end.
  QueryResult history(std::span<const std::string> topics, uint64_t start_ns, uint64_t end_ns) const;
  // Sizes the latest window so the payload fits bytes_per_second * target.
  // Throws kNoBandwidthEstimate for an estimate that never saw a sample.
  QueryResult automatic(std::span<const std::string> topics, double target_seconds,
                        const BandwidthEstimate& bandwidth, const AutoQueryOptions& options = {}) const;

  // Current metadata, re-read from disk.
  ContainerMetadata metadata() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  struct Resolved {
    std::vector<std::string> names;  // deduplicated, request order
    std::vector<uint32_t> ids;
  };

  Resolved resolve(std::span<const std::string> topics) const;
  QueryResult collect(const Resolved& topics, const IndexHeader& snap, uint64_t start_ns,
                      uint64_t end_ns) const;
  void refresh_topics() const;

  std::filesystem::path root_;
  TimeIndexReader index_;
  ContainerReader container_;
  mutable std::mutex topics_mu_;
  mutable std::unique_ptr<TopicTable> topics_;
  mutable ContainerMetadata meta_;
};

}  // namespace brickstore
