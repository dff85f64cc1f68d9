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

#include "brickstore/protocol.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include <fmt/format.h>

namespace brickstore {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) {
      ++i;
    }
    const size_t start = i;
    while (i < line.size() && !is_space(line[i])) {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

constexpr uint64_t kMaxPayload = uint64_t{1} << 31;

}  // namespace

uint64_t parse_seconds(std::string_view token) {
  auto bad = [&]() -> Error {
    return Error(ErrorCode::kBadParam, fmt::format("bad time value '{}'", token));
  };
  if (token.empty()) {
    throw bad();
  }
  const auto dot = token.find('.');
  const std::string_view whole = token.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : token.substr(dot + 1);
  if (whole.empty() && frac.empty()) {
    throw bad();
  }
  constexpr uint64_t kMax = std::numeric_limits<uint64_t>::max();
  uint64_t seconds = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') {
      throw bad();
    }
    const uint64_t d = static_cast<uint64_t>(c - '0');
    if (seconds > (kMax - d) / 10) {
      throw bad();
    }
    seconds = seconds * 10 + d;
  }
  uint64_t nanos = 0;
  uint64_t scale = 100'000'000;
  for (char c : frac) {
    if (c < '0' || c > '9') {
      throw bad();
    }
    nanos += static_cast<uint64_t>(c - '0') * scale;
    scale /= 10;
  }
  if (seconds > (kMax - nanos) / kNanosPerSecond) {
    throw bad();
  }
  return seconds * kNanosPerSecond + nanos;
}

std::string format_seconds(uint64_t ns) {
  std::string out = fmt::format("{}", ns / kNanosPerSecond);
  const uint64_t frac = ns % kNanosPerSecond;
  if (frac != 0) {
    std::string digits = fmt::format("{:09}", frac);
    while (digits.back() == '0') {
      digits.pop_back();
    }
    out += '.';
    out += digits;
  }
  return out;
}

QueryCommand parse_command(std::string_view line) {
  const auto tokens = tokenize(line);
  if (tokens.empty()) {
    throw Error(ErrorCode::kBadCommand, "empty command");
  }
  QueryCommand cmd;
  size_t numeric = 0;
  if (tokens[0] == "q") {
    cmd.kind = CommandKind::kLatest;
    numeric = 1;
  } else if (tokens[0] == "qh") {
    cmd.kind = CommandKind::kHistory;
    numeric = 2;
  } else if (tokens[0] == "qa") {
    cmd.kind = CommandKind::kAuto;
    numeric = 1;
  } else {
    throw Error(ErrorCode::kBadCommand,
                fmt::format("unknown command '{}'", tokens[0].substr(0, std::min<size_t>(tokens[0].size(), 64))));
  }
  if (tokens.size() < 2 + numeric) {
    throw Error(ErrorCode::kBadArity,
                fmt::format("{} needs at least one topic and {} time value(s)", tokens[0], numeric));
  }
  const size_t topics_end = tokens.size() - numeric;
  for (size_t i = 1; i < topics_end; ++i) {
    cmd.topics.emplace_back(tokens[i]);
  }
  switch (cmd.kind) {
    case CommandKind::kLatest:
      cmd.time_len_ns = parse_seconds(tokens[topics_end]);
      if (cmd.time_len_ns == 0) {
        throw Error(ErrorCode::kBadParam, "time_len must be positive");
      }
      break;
    case CommandKind::kHistory:
      cmd.start_ns = parse_seconds(tokens[topics_end]);
      cmd.end_ns = parse_seconds(tokens[topics_end + 1]);
      break;
    case CommandKind::kAuto:
      cmd.target_ns = parse_seconds(tokens[topics_end]);
      if (cmd.target_ns == 0) {
        throw Error(ErrorCode::kBadParam, "target must be positive");
      }
      break;
  }
  return cmd;
}

std::string format_command(const QueryCommand& cmd) {
  std::string out;
  switch (cmd.kind) {
    case CommandKind::kLatest:
      out = "q";
      break;
    case CommandKind::kHistory:
      out = "qh";
      break;
    case CommandKind::kAuto:
      out = "qa";
      break;
  }
  for (const auto& t : cmd.topics) {
    out += ' ';
    out += t;
  }
  switch (cmd.kind) {
    case CommandKind::kLatest:
      out += ' ' + format_seconds(cmd.time_len_ns);
      break;
    case CommandKind::kHistory:
      out += ' ' + format_seconds(cmd.start_ns) + ' ' + format_seconds(cmd.end_ns);
      break;
    case CommandKind::kAuto:
      out += ' ' + format_seconds(cmd.target_ns);
      break;
  }
  return out;
}

ResponseFrame ResponseFrame::error(ErrorCode code, std::string text) {
  ResponseFrame f;
  f.status = FrameStatus::kError;
  f.error_code = code;
  f.error_text = std::move(text);
  return f;
}

size_t encoded_response_size(const ResponseFrame& frame) {
  size_t n = kFrameFixedHeader;
  if (frame.status == FrameStatus::kError) {
    return n + 4 + frame.error_text.size();
  }
  for (const auto& m : frame.messages) {
    n += 2 + m.topic.size() + 8 + 4 + m.payload.size();
  }
  return n;
}

Bytes encode_response(const ResponseFrame& frame) {
  if (frame.status == FrameStatus::kError && (frame.error_code == ErrorCode::kOk || !frame.messages.empty())) {
    throw Error(ErrorCode::kInvalidMessage, "error frame needs a non-zero code and no messages");
  }
  if (frame.status == FrameStatus::kOk && frame.error_code != ErrorCode::kOk) {
    throw Error(ErrorCode::kInvalidMessage, "ok frame with an error code");
  }
  if (frame.messages.size() > std::numeric_limits<uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidMessage, "too many messages for one frame");
  }
  Bytes out;
  out.reserve(encoded_response_size(frame));
  put_bytes(out, std::string_view(kFrameMagic, 4));
  put_le<uint8_t>(out, kProtocolVersion);
  put_le<uint8_t>(out, static_cast<uint8_t>(frame.status));
  put_le<uint16_t>(out, static_cast<uint16_t>(frame.error_code));
  put_le<uint32_t>(out, static_cast<uint32_t>(frame.messages.size()));
  if (frame.status == FrameStatus::kError) {
    put_le<uint32_t>(out, static_cast<uint32_t>(frame.error_text.size()));
    put_bytes(out, frame.error_text);
    return out;
  }
  for (const auto& m : frame.messages) {
    if (m.topic.size() > std::numeric_limits<uint16_t>::max() || m.payload.size() > kMaxPayload) {
      throw Error(ErrorCode::kInvalidMessage, "topic name or payload too long for the wire");
    }
    put_le<uint16_t>(out, static_cast<uint16_t>(m.topic.size()));
    put_bytes(out, m.topic);
    put_le<uint64_t>(out, m.timestamp);
    put_le<uint32_t>(out, static_cast<uint32_t>(m.payload.size()));
    put_bytes(out, m.payload);
  }
  return out;
}

ResponseFrame read_response(const ReadExact& read) {
  uint8_t head[kFrameFixedHeader];
  read(head);
  if (std::memcmp(head, kFrameMagic, 4) != 0) {
    throw Error(ErrorCode::kBadFrame, "bad frame magic", 0);
  }
  if (head[4] != kProtocolVersion) {
    throw Error(ErrorCode::kBadFrame, fmt::format("unsupported protocol version {}", head[4]), 4);
  }
  if (head[5] > 1) {
    throw Error(ErrorCode::kBadFrame, fmt::format("bad status {}", head[5]), 5);
  }
  ResponseFrame frame;
  frame.status = static_cast<FrameStatus>(head[5]);
  const uint16_t code = load_le<uint16_t>(head + 6);
  if (code > static_cast<uint16_t>(ErrorCode::kInternal)) {
    throw Error(ErrorCode::kBadFrame, fmt::format("unknown error code {}", code), 6);
  }
  frame.error_code = static_cast<ErrorCode>(code);
  const uint32_t count = load_le<uint32_t>(head + 8);
  if (frame.status == FrameStatus::kError) {
    if (code == 0 || count != 0) {
      throw Error(ErrorCode::kBadFrame, "malformed error frame", 6);
    }
    uint8_t len_buf[4];
    read(len_buf);
    const uint32_t len = load_le<uint32_t>(len_buf);
    if (len > (1u << 20)) {
      throw Error(ErrorCode::kBadFrame, "error text too long", kFrameFixedHeader);
    }
    frame.error_text.resize(len);
    read({reinterpret_cast<uint8_t*>(frame.error_text.data()), len});
    return frame;
  }
  if (code != 0) {
    throw Error(ErrorCode::kBadFrame, "ok frame with an error code", 6);
  }
  frame.messages.reserve(std::min<uint32_t>(count, 1u << 16));
  for (uint32_t i = 0; i < count; ++i) {
    Message m;
    uint8_t len2[2];
    read(len2);
    m.topic.resize(load_le<uint16_t>(len2));
    read({reinterpret_cast<uint8_t*>(m.topic.data()), m.topic.size()});
    uint8_t mid[12];
    read(mid);
    m.timestamp = load_le<uint64_t>(mid);
    const uint32_t plen = load_le<uint32_t>(mid + 8);
    if (plen > kMaxPayload) {
      throw Error(ErrorCode::kBadFrame, "payload length out of range");
    }
    // Grow in slices so a lying length fails on the short read, not on allocation.
    constexpr size_t kSlice = 1 << 20;
    for (size_t done = 0; done < plen;) {
      const size_t n = std::min<size_t>(kSlice, plen - done);
      m.payload.resize(done + n);
      read({m.payload.data() + done, n});
      done += n;
    }
    frame.messages.push_back(std::move(m));
  }
  return frame;
}

ResponseFrame decode_response(ByteView bytes) {
  size_t pos = 0;
  auto reader = [&](std::span<uint8_t> dst) {
    if (dst.size() > bytes.size() - pos) {
      throw Error(ErrorCode::kBadFrame, fmt::format("frame truncated at byte {}", bytes.size()), bytes.size());
    }
    if (!dst.empty()) {
      std::memcpy(dst.data(), bytes.data() + pos, dst.size());
    }
    pos += dst.size();
  };
  ResponseFrame frame = read_response(reader);
  if (pos != bytes.size()) {
    throw Error(ErrorCode::kBadFrame, fmt::format("{} trailing bytes after frame", bytes.size() - pos), pos);
  }
  return frame;
}

std::vector<Message> unwrap_response(ResponseFrame frame) {
  if (frame.status == FrameStatus::kError) {
    throw Error(frame.error_code, frame.error_text);
  }
  return std::move(frame.messages);
}

}  // namespace brickstore
