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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brickstore/container.hpp"
#include "brickstore/error.hpp"
#include "brickstore/io.hpp"

namespace brickstore {

// Request grammar, one LF-terminated line of whitespace-separated tokens:
//   q  <topic>... <time_len_s>
//   qh <topic>... <start_s> <end_s>
//   qa <topic>... <target_s>
// Times are non-negative decimal seconds, converted exactly to nanoseconds
// (digits past the ninth decimal place are truncated).
enum class CommandKind : uint8_t { kLatest, kHistory, kAuto };

struct QueryCommand {
  CommandKind kind = CommandKind::kLatest;
  std::vector<std::string> topics;
  uint64_t time_len_ns = 0;  // kLatest
  uint64_t start_ns = 0;     // kHistory
  uint64_t end_ns = 0;       // kHistory
  uint64_t target_ns = 0;    // kAuto

  bool operator==(const QueryCommand&) const = default;
};

// Throws kBadCommand, kBadArity or kBadParam. Never anything else.
QueryCommand parse_command(std::string_view line);
// Inverse of parse_command (no trailing newline).
std::string format_command(const QueryCommand& cmd);

// Throws kBadParam.
uint64_t parse_seconds(std::string_view token);
std::string format_seconds(uint64_t ns);

// Reply frame, little-endian:
//   "RFSR" | version u8 | status u8 | error_code u16 | message_count u32
//   then message_count records: u16 topic_len | topic | u64 ts | u32 len | payload
// An error reply (status 1) has message_count 0 and carries
// u32 text_len | text instead of records.
inline constexpr char kFrameMagic[4] = {'R', 'F', 'S', 'R'};
inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr size_t kFrameFixedHeader = 12;

enum class FrameStatus : uint8_t { kOk = 0, kError = 1 };

struct ResponseFrame {
  FrameStatus status = FrameStatus::kOk;
  ErrorCode error_code = ErrorCode::kOk;
  std::string error_text;
  std::vector<Message> messages;

  static ResponseFrame error(ErrorCode code, std::string text);
  bool operator==(const ResponseFrame&) const = default;
};

Bytes encode_response(const ResponseFrame& frame);
size_t encoded_response_size(const ResponseFrame& frame);
// Throws kBadFrame, with the offending byte offset where known.
ResponseFrame decode_response(ByteView bytes);

// Pull decoder for streams: read(dst) must fill dst completely or throw.
using ReadExact = std::function<void(std::span<uint8_t>)>;
ResponseFrame read_response(const ReadExact& read);

// Throws Error(code, text) for an error frame; returns the messages otherwise.
std::vector<Message> unwrap_response(ResponseFrame frame);

}  // namespace brickstore
