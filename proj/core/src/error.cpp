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

#include "brickstore/error.hpp"

#include <cerrno>
#include <cstring>

namespace brickstore {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kBadCommand: return "BadCommand";
    case ErrorCode::kBadArity: return "BadArity";
    case ErrorCode::kBadParam: return "BadParam";
    case ErrorCode::kUnknownTopic: return "UnknownTopic";
    case ErrorCode::kInvalidRange: return "InvalidRange";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kNoBandwidthEstimate: return "NoBandwidthEstimate";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kCorruptMetadata: return "CorruptMetadata";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kOutOfOrderTimestamp: return "OutOfOrderTimestamp";
    case ErrorCode::kAlreadyExists: return "AlreadyExists";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kBadFrame: return "BadFrame";
    case ErrorCode::kNotABag: return "NotABag";
    case ErrorCode::kUnsupportedCompression: return "UnsupportedCompression";
    case ErrorCode::kCorruptBag: return "CorruptBag";
    case ErrorCode::kInvalidMessage: return "InvalidMessage";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

void throw_errno(const std::string& context) {
  const int err = errno;
  throw Error(ErrorCode::kIoError, context + ": " + std::strerror(err));
}

}  // namespace brickstore
