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

#include "brickstore/synth.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "brickstore/error.hpp"
#include "brickstore/protocol.hpp"

namespace brickstore {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t seed, uint32_t topic_index, uint64_t seq) {
  uint64_t s = seed ^ (uint64_t{topic_index} << 48) ^ 0x5851f42d4c957f2dULL;
  const uint64_t a = splitmix64(s);
  s = a ^ seq;
  return splitmix64(s);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void workload_error(size_t line, const std::string& what) {
  throw Error(ErrorCode::kBadParam, fmt::format("workload line {}: {}", line, what), line);
}

double parse_double(std::string_view v, size_t line) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    workload_error(line, fmt::format("bad number '{}'", v));
  }
  return out;
}

uint64_t parse_u64(std::string_view v, size_t line) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    workload_error(line, fmt::format("bad integer '{}'", v));
  }
  return out;
}

constexpr size_t kb(double kib) { return static_cast<size_t>(kib * 1024.0); }

}  // namespace

uint64_t synth_message_count(const TopicSpec& spec) {
  if (spec.rate_hz <= 0 || spec.duration_s <= 0) {
    return 0;
  }
  // Small epsilon so 30 Hz * 10 s lands on 300, not 299.
  return static_cast<uint64_t>(std::floor(spec.rate_hz * spec.duration_s + 1e-9));
}

uint64_t synth_timestamp(const Workload& w, size_t topic_index, uint64_t seq) {
  const double rate = w.topics.at(topic_index).rate_hz;
  const long double offset = static_cast<long double>(seq) * 1e9L / rate;
  return w.start_time_ns + static_cast<uint64_t>(std::llround(offset));
}

Bytes synth_payload(const TopicSpec& spec, uint32_t topic_index, uint64_t seq, uint64_t timestamp) {
  const size_t size = std::max(spec.payload_size, kSynthTrailerSize);
  Bytes out(size);
  const size_t body = size - kSynthTrailerSize;
  uint64_t state = mix_seed(spec.seed, topic_index, seq);
  size_t i = 0;
  for (; i + 8 <= body; i += 8) {
    store_le<uint64_t>(out.data() + i, splitmix64(state));
  }
  if (i < body) {
    const uint64_t tail = splitmix64(state);
    std::memcpy(out.data() + i, &tail, body - i);
  }
  store_le<uint32_t>(out.data() + body, topic_index);
  store_le<uint64_t>(out.data() + body + 4, seq);
  store_le<uint64_t>(out.data() + body + 12, timestamp);
  return out;
}

std::optional<SynthTrailer> decode_synth_trailer(ByteView payload) {
  if (payload.size() < kSynthTrailerSize) {
    return std::nullopt;
  }
  const uint8_t* p = payload.data() + payload.size() - kSynthTrailerSize;
  return SynthTrailer{load_le<uint32_t>(p), load_le<uint64_t>(p + 4), load_le<uint64_t>(p + 12)};
}

bool verify_synth_payload(const Workload& w, ByteView payload) {
  const auto trailer = decode_synth_trailer(payload);
  if (!trailer || trailer->topic_index >= w.topics.size()) {
    return false;
  }
  const auto& spec = w.topics[trailer->topic_index];
  if (trailer->seq >= synth_message_count(spec) ||
      trailer->timestamp != synth_timestamp(w, trailer->topic_index, trailer->seq)) {
    return false;
  }
  const Bytes expect = synth_payload(spec, trailer->topic_index, trailer->seq, trailer->timestamp);
  return std::equal(expect.begin(), expect.end(), payload.begin(), payload.end());
}

SynthSource::SynthSource(Workload workload) : workload_(std::move(workload)) {
  for (uint32_t i = 0; i < workload_.topics.size(); ++i) {
    validate_topic_name(workload_.topics[i].name);
    if (synth_message_count(workload_.topics[i]) > 0) {
      heap_.push(Cursor{synth_timestamp(workload_, i, 0), i, 0});
    }
  }
}

std::optional<Message> SynthSource::next() {
  if (heap_.empty()) {
    return std::nullopt;
  }
  const Cursor c = heap_.top();
  heap_.pop();
  const auto& spec = workload_.topics[c.topic_index];
  Message msg{c.timestamp, spec.name, synth_payload(spec, c.topic_index, c.seq, c.timestamp)};
  if (c.seq + 1 < synth_message_count(spec)) {
    heap_.push(Cursor{synth_timestamp(workload_, c.topic_index, c.seq + 1), c.topic_index, c.seq + 1});
  }
  return msg;
}

std::string SynthSource::message_type(std::string_view topic) const {
  for (const auto& t : workload_.topics) {
    if (t.name == topic) {
      return t.type;
    }
  }
  return {};
}

uint64_t SynthSource::total_messages() const {
  uint64_t n = 0;
  for (const auto& t : workload_.topics) {
    n += synth_message_count(t);
  }
  return n;
}

Workload parse_workload(std::string_view text) {
  Workload w;
  TopicSpec* current = nullptr;
  size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line == "[topic]") {
      current = &w.topics.emplace_back();
      current->name.clear();
      continue;
    }
    if (line.front() == '[') {
      workload_error(line_no, fmt::format("unknown section {}", line));
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      workload_error(line_no, "expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (current == nullptr) {
      if (key == "start_time") {
        try {
          w.start_time_ns = parse_seconds(value);
        } catch (const Error&) {
          workload_error(line_no, fmt::format("bad start_time '{}'", value));
        }
      } else {
        workload_error(line_no, fmt::format("unknown key '{}'", key));
      }
      continue;
    }
    if (key == "name") {
      current->name = std::string(value);
    } else if (key == "type") {
      current->type = std::string(value);
    } else if (key == "rate_hz") {
      current->rate_hz = parse_double(value, line_no);
    } else if (key == "payload_size") {
      current->payload_size = parse_u64(value, line_no);
    } else if (key == "duration") {
      current->duration_s = parse_double(value, line_no);
    } else if (key == "seed") {
      current->seed = parse_u64(value, line_no);
    } else {
      workload_error(line_no, fmt::format("unknown key '{}'", key));
    }
  }
  for (const auto& t : w.topics) {
    if (t.name.empty()) {
      throw Error(ErrorCode::kBadParam, "workload topic without a name");
    }
    if (!(t.rate_hz > 0)) {
      throw Error(ErrorCode::kBadParam, fmt::format("topic {}: rate_hz must be positive", t.name));
    }
  }
  return w;
}

Workload load_workload(const std::filesystem::path& path) { return parse_workload(read_file(path)); }

std::string format_workload(const Workload& w) {
  std::ostringstream out;
  out << fmt::format("start_time = {}.{:09}\n", w.start_time_ns / 1'000'000'000ULL,
                     w.start_time_ns % 1'000'000'000ULL);
  for (const auto& t : w.topics) {
    out << fmt::format("\n[topic]\nname = {}\ntype = {}\nrate_hz = {}\npayload_size = {}\nduration = {}\nseed = {}\n",
                       t.name, t.type, t.rate_hz, t.payload_size, t.duration_s, t.seed);
  }
  return out.str();
}

Workload workload_preset(std::string_view name, double duration_s, uint64_t seed) {
  Workload w;
  auto add = [&](std::string topic, std::string type, double rate, size_t size) {
    w.topics.push_back(TopicSpec{std::move(topic), std::move(type), rate, size, duration_s,
                                 seed + w.topics.size()});
  };
  if (name == "drone") {
    add("/camera/image_raw", "sensor_msgs/Image", 30, kb(300.07));
    add("/camera/image_raw/compressed", "sensor_msgs/CompressedImage", 30, kb(18.20));
    add("/imu", "sensor_msgs/Imu", 200, kb(0.31));
  } else if (name == "slam") {
    add("/camera/depth/image", "sensor_msgs/Image", 30, 1228800);
    add("/camera/rgb/image_color", "sensor_msgs/Image", 30, 921600);
    add("/imu", "sensor_msgs/Imu", 500, 376);
    add("/cortex_marker_array", "visualization_msgs/MarkerArray", 100, 1887);
    add("/camera/depth/camera_info", "sensor_msgs/CameraInfo", 30, 445);
    add("/camera/rgb/camera_info", "sensor_msgs/CameraInfo", 30, 445);
  } else if (name == "mvsec") {
    add("/visensor/imu", "sensor_msgs/Imu", 200, kb(0.31));
    add("/davis/left/imu", "sensor_msgs/Imu", 10000, kb(0.31));
    add("/visensor/left/image_raw", "sensor_msgs/Image", 20, kb(352.54));
    add("/davis/left/image_raw", "sensor_msgs/Image", 44, 90000);
    add("/velodyne_point_cloud", "sensor_msgs/PointCloud2", 20, kb(360.89));
  } else if (name == "imu") {
    add("/imu", "sensor_msgs/Imu", 200, kb(0.31));
  } else {
    throw Error(ErrorCode::kBadParam, fmt::format("unknown workload preset '{}'", name));
  }
  return w;
}

std::vector<std::string> workload_preset_names() { return {"drone", "slam", "mvsec", "imu"}; }

}  // namespace brickstore
