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

#include "brickstore/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "brickstore/error.hpp"

namespace brickstore {

namespace {

using Clock = std::chrono::steady_clock;

// Mean payload bytes per second of a topic, from the metadata counters.
double topic_byte_rate(const TopicInfo& t) {
  if (t.message_count == 0) {
    return 0;
  }
  if (t.message_count < 2 || t.last_timestamp <= t.first_timestamp) {
    // One sample, no rate: assume the whole payload arrives every second.
    return static_cast<double>(t.payload_bytes);
  }
  const double span_s = static_cast<double>(t.last_timestamp - t.first_timestamp) / 1e9;
  const double rate = static_cast<double>(t.message_count - 1) / span_s;
  const double mean = static_cast<double>(t.payload_bytes) / static_cast<double>(t.message_count);
  return rate * mean;
}

}  // namespace

size_t QueryResult::count_for(std::string_view topic) const {
  return static_cast<size_t>(
      std::count_if(messages.begin(), messages.end(), [&](const Message& m) { return m.topic == topic; }));
}

uint64_t QueryResult::payload_bytes() const {
  uint64_t n = 0;
  for (const auto& m : messages) {
    n += m.payload.size();
  }
  return n;
}

bool BandwidthEstimate::is_stale(Clock::time_point now) const {
  return samples == 0 || now - last_updated > 2 * sample_window;
}

BandwidthEstimate update_bandwidth(BandwidthEstimate previous, uint64_t bytes_transferred,
                                   std::chrono::nanoseconds elapsed, Clock::time_point now, double alpha) {
  if (elapsed.count() <= 0) {
    throw Error(ErrorCode::kBadParam, "bandwidth sample with non-positive duration");
  }
  const double observed = static_cast<double>(bytes_transferred) * 1e9 / static_cast<double>(elapsed.count());
  BandwidthEstimate next = previous;
  next.bytes_per_second =
      previous.samples == 0 ? observed : alpha * observed + (1.0 - alpha) * previous.bytes_per_second;
  next.last_updated = now;
  next.samples = previous.samples + 1;
  return next;
}

BandwidthMonitor::BandwidthMonitor(double alpha, std::chrono::nanoseconds window) : alpha_(alpha) {
  estimate_.sample_window = window;
}

void BandwidthMonitor::record(uint64_t bytes, std::chrono::nanoseconds elapsed) {
  std::lock_guard lock(mu_);
  estimate_ = update_bandwidth(estimate_, bytes, elapsed, Clock::now(), alpha_);
}

void BandwidthMonitor::reset() {
  std::lock_guard lock(mu_);
  const auto window = estimate_.sample_window;
  estimate_ = BandwidthEstimate{};
  estimate_.sample_window = window;
}

BandwidthEstimate BandwidthMonitor::estimate() const {
  std::lock_guard lock(mu_);
  return estimate_;
}

QueryEngine::QueryEngine(const std::filesystem::path& root, TimeIndexReader::Access access)
    : root_(root), index_(layout::index_path(root), access), container_(root) {
  refresh_topics();
}

void QueryEngine::refresh_topics() const {
  meta_ = read_metadata(root_);
  topics_ = std::make_unique<TopicTable>(root_, meta_);
}

ContainerMetadata QueryEngine::metadata() const {
  std::lock_guard lock(topics_mu_);
  refresh_topics();
  return meta_;
}

QueryEngine::Resolved QueryEngine::resolve(std::span<const std::string> topics) const {
  Resolved out;
  std::lock_guard lock(topics_mu_);
  bool refreshed = false;
  for (const auto& name : topics) {
    if (std::find(out.names.begin(), out.names.end(), name) != out.names.end()) {
      continue;
    }
    auto id = topics_->find(name);
    if (!id && !refreshed) {
      // The recorder may have registered it since we last looked.
      refresh_topics();
      refreshed = true;
      id = topics_->find(name);
    }
    if (!id) {
      throw Error(ErrorCode::kUnknownTopic, fmt::format("unknown topic {}", name));
    }
    out.names.push_back(name);
    out.ids.push_back(*id);
  }
  return out;
}

QueryResult QueryEngine::collect(const Resolved& topics, const IndexHeader& snap, uint64_t start_ns,
                                 uint64_t end_ns) const {
  QueryResult result;
  result.stats.watermark = snap.watermark;
  std::vector<uint32_t> indexed;
  for (auto id : topics.ids) {
    // Registered topics whose first entry is not yet published have no records.
    if (id < snap.topic_limit) {
      indexed.push_back(id);
    }
  }
  if (indexed.empty() || !snap.watermark) {
    return result;
  }
  auto resolver = [this](uint32_t topic, uint64_t offset) { return container_.brick(topic).record_end(offset); };
  const auto ranges = index_.search_range(snap, start_ns, end_ns, indexed, resolver);
  for (size_t i = 0; i < topics.ids.size(); ++i) {
    const auto it = ranges.find(topics.ids[i]);
    if (it == ranges.end() || it->second.empty()) {
      continue;
    }
    auto records = container_.brick(topics.ids[i]).read_sequential(it->second.start, it->second.end);
    for (auto& r : records) {
      if (r.timestamp < start_ns || r.timestamp > end_ns) {
        throw Error(ErrorCode::kCorruptIndex,
                    fmt::format("record at {} of topic {} outside searched range", r.offset, topics.names[i]),
                    r.offset);
      }
      result.stats.bytes += r.payload.size();
      result.messages.push_back(Message{r.timestamp, topics.names[i], std::move(r.payload)});
    }
  }
  return result;
}

QueryResult QueryEngine::latest(std::span<const std::string> topics, uint64_t time_len_ns) const {
  const auto t0 = Clock::now();
  const auto resolved = resolve(topics);
  const auto snap = index_.snapshot();
  QueryResult result;
  if (!snap.watermark) {
    result.stats.stale = true;
  } else if (time_len_ns > 0) {
    const uint64_t wm = snap.watermark->timestamp;
    const uint64_t start = time_len_ns > wm ? 0 : wm - time_len_ns + 1;
    result = collect(resolved, snap, start, wm);
  }
  result.stats.time_len_ns = time_len_ns;
  result.stats.service_time = Clock::now() - t0;
  return result;
}

QueryResult QueryEngine::history(std::span<const std::string> topics, uint64_t start_ns,
                                 uint64_t end_ns) const {
  const auto t0 = Clock::now();
  if (start_ns > end_ns) {
    throw Error(ErrorCode::kInvalidRange, fmt::format("start {} after end {}", start_ns, end_ns));
  }
  const auto resolved = resolve(topics);
  const auto snap = index_.snapshot();
  QueryResult result;
  if (!snap.watermark) {
    result.stats.stale = true;
  } else {
    result = collect(resolved, snap, start_ns, end_ns);
  }
  result.stats.service_time = Clock::now() - t0;
  return result;
}

QueryResult QueryEngine::automatic(std::span<const std::string> topics, double target_seconds,
                                   const BandwidthEstimate& bandwidth, const AutoQueryOptions& options) const {
  const auto t0 = Clock::now();
  if (!bandwidth.has_value()) {
    throw Error(ErrorCode::kNoBandwidthEstimate, "no bandwidth estimate available");
  }
  if (!(target_seconds > 0)) {
    throw Error(ErrorCode::kBadParam, "target duration must be positive");
  }
  const auto resolved = resolve(topics);
  ContainerMetadata meta;
  {
    std::lock_guard lock(topics_mu_);
    refresh_topics();
    meta = meta_;
  }
  const auto snap = index_.snapshot();
  QueryResult result;
  if (!snap.watermark) {
    result.stats.stale = true;
    result.stats.service_time = Clock::now() - t0;
    return result;
  }
  const uint64_t wm = snap.watermark->timestamp;

  std::vector<double> rates;
  double total_rate = 0;
  uint64_t first_ts = wm;
  for (auto id : resolved.ids) {
    const double r = id < meta.topics.size() ? topic_byte_rate(meta.topics[id]) : 0.0;
    rates.push_back(r);
    total_rate += r;
    if (id < meta.topics.size() && meta.topics[id].message_count > 0) {
      first_ts = std::min(first_ts, meta.topics[id].first_timestamp);
    }
  }

  const double budget = bandwidth.bytes_per_second * target_seconds;
  const uint64_t full_len = wm - first_ts + 1;
  uint64_t len = full_len;
  if (total_rate > 0 && std::isfinite(budget)) {
    const double want_ns = budget / total_rate * 1e9;
    if (want_ns < static_cast<double>(full_len)) {
      len = std::max<uint64_t>(static_cast<uint64_t>(want_ns), options.min_time_len_ns);
    }
  }
  len = std::min(len, full_len);

  const uint64_t start = len > wm ? 0 : wm - len + 1;
  result = collect(resolved, snap, start, wm);
  result.stats.time_len_ns = len;
  result.stats.budget_bytes = budget;

  // Rate estimates are averages, so the window can overshoot. Drop the oldest
  // messages of each topic until it fits its share of the budget.
  if (std::isfinite(budget) && result.stats.bytes > budget) {
    std::vector<Message> kept;
    kept.reserve(result.messages.size());
    size_t begin = 0;
    for (size_t i = 0; i < resolved.names.size(); ++i) {
      size_t end = begin;
      uint64_t bytes = 0;
      while (end < result.messages.size() && result.messages[end].topic == resolved.names[i]) {
        bytes += result.messages[end].payload.size();
        ++end;
      }
      const double share = total_rate > 0 ? budget * rates[i] / total_rate
                                          : budget / static_cast<double>(resolved.names.size());
      size_t from = begin;
      while (from < end && static_cast<double>(bytes) > share) {
        bytes -= result.messages[from].payload.size();
        ++from;
      }
      if (from != begin) {
        result.stats.trimmed = true;
      }
      for (size_t k = from; k < end; ++k) {
        kept.push_back(std::move(result.messages[k]));
      }
      begin = end;
    }
    result.messages = std::move(kept);
    result.stats.bytes = result.payload_bytes();
  }
  result.stats.service_time = Clock::now() - t0;
  return result;
}

}  // namespace brickstore
