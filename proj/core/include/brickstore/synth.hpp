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
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "brickstore/recorder.hpp"

namespace brickstore {

// One synthetic topic. Payload bytes are a pure function of
// (seed, topic index, sequence number); the last kSynthTrailerSize bytes
// carry (topic index, seq, timestamp) so results can be checked without
// keeping copies.
struct TopicSpec {
  std::string name;
  std::string type = "brickstore/Synthetic";
  double rate_hz = 1.0;
  size_t payload_size = 64;
  double duration_s = 10.0;
  uint64_t seed = 1;

  bool operator==(const TopicSpec&) const = default;
};

struct Workload {
  uint64_t start_time_ns = 1'700'000'000'000'000'000ULL;
  std::vector<TopicSpec> topics;

  bool operator==(const Workload&) const = default;
};

inline constexpr size_t kSynthTrailerSize = 20;

struct SynthTrailer {
  uint32_t topic_index = 0;
  uint64_t seq = 0;
  uint64_t timestamp = 0;
};

// floor(rate * duration)
uint64_t synth_message_count(const TopicSpec& spec);
uint64_t synth_timestamp(const Workload& w, size_t topic_index, uint64_t seq);
Bytes synth_payload(const TopicSpec& spec, uint32_t topic_index, uint64_t seq, uint64_t timestamp);
std::optional<SynthTrailer> decode_synth_trailer(ByteView payload);
// True when the payload is byte-identical to what the generator emits for
// the (topic, seq, timestamp) named in its trailer.
bool verify_synth_payload(const Workload& w, ByteView payload);

// Merged, timestamp-ordered stream over every topic of a workload.
class SynthSource : public MessageSource {
 public:
  explicit SynthSource(Workload workload);

  std::optional<Message> next() override;
  std::string message_type(std::string_view topic) const override;

  const Workload& workload() const { return workload_; }
  uint64_t total_messages() const;

 private:
  struct Cursor {
    uint64_t timestamp;
    uint32_t topic_index;
    uint64_t seq;
    bool operator>(const Cursor& o) const {
      return timestamp != o.timestamp ? timestamp > o.timestamp : topic_index > o.topic_index;
    }
  };

  Workload workload_;
  std::priority_queue<Cursor, std::vector<Cursor>, std::greater<>> heap_;
};

// Workload spec files: "key = value" lines; each "[topic]" opens a topic
// block. Global keys: start_time (decimal seconds). Topic keys: name, type,
// rate_hz, payload_size, duration, seed. '#' starts a comment.
Workload parse_workload(std::string_view text);
Workload load_workload(const std::filesystem::path& path);
std::string format_workload(const Workload& w);

// Named workload shapes: "drone", "slam", "mvsec", "imu".
Workload workload_preset(std::string_view name, double duration_s, uint64_t seed = 1);
std::vector<std::string> workload_preset_names();

}  // namespace brickstore
