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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace brickstore {

// Numeric values are part of the wire protocol. Never renumber.
enum class ErrorCode : uint16_t {
  kOk = 0,
  kBadCommand = 1,
  kBadArity = 2,
  kBadParam = 3,
  kUnknownTopic = 4,
  kInvalidRange = 5,
  kEmptyIndex = 6,
  kNoBandwidthEstimate = 7,
  kIoError = 8,
  kCorruptRecord = 9,
  kCorruptIndex = 10,
  kCorruptMetadata = 11,
  kOutOfBounds = 12,
  kOutOfOrderTimestamp = 13,
  kAlreadyExists = 14,
  kTimeout = 15,
  kBadFrame = 16,
  kNotABag = 17,
  kUnsupportedCompression = 18,
  kCorruptBag = 19,
  kInvalidMessage = 20,
  kInternal = 21,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Error(ErrorCode code, const std::string& what, uint64_t position)
      : std::runtime_error(what), code_(code), position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  // Byte offset or page id the error refers to, when there is one.
  std::optional<uint64_t> position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::optional<uint64_t> position_;
};

// Throws kIoError carrying strerror(errno).
[[noreturn]] void throw_errno(const std::string& context);

}  // namespace brickstore
