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

#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "brickstore/error.hpp"
#include "brickstore/protocol.hpp"
#include "support.hpp"

namespace brickstore {
namespace {

ErrorCode code_of(std::string_view line) {
  try {
    parse_command(line);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(ProtocolTest, ParsesLatest) {
  const auto cmd = parse_command("q /topicA /topicB 1.5");
  EXPECT_EQ(cmd.kind, CommandKind::kLatest);
  EXPECT_EQ(cmd.topics, (std::vector<std::string>{"/topicA", "/topicB"}));
  EXPECT_EQ(cmd.time_len_ns, 1'500'000'000u);
}

TEST(ProtocolTest, ParsesHistoryAndAuto) {
  const auto h = parse_command("qh /imu 10 20.000000001\n");
  EXPECT_EQ(h.kind, CommandKind::kHistory);
  EXPECT_EQ(h.start_ns, 10'000'000'000u);
  EXPECT_EQ(h.end_ns, 20'000'000'001u);
  const auto a = parse_command("  qa\t/camera/image_raw   0.25  ");
  EXPECT_EQ(a.kind, CommandKind::kAuto);
  EXPECT_EQ(a.topics, std::vector<std::string>{"/camera/image_raw"});
  EXPECT_EQ(a.target_ns, 250'000'000u);
}

TEST(ProtocolTest, ErrorCodes) {
  EXPECT_EQ(code_of(""), ErrorCode::kBadCommand);
  EXPECT_EQ(code_of("   "), ErrorCode::kBadCommand);
  EXPECT_EQ(code_of("x /a 1"), ErrorCode::kBadCommand);
  EXPECT_EQ(code_of("Q /a 1"), ErrorCode::kBadCommand);
  EXPECT_EQ(code_of("q"), ErrorCode::kBadArity);
  EXPECT_EQ(code_of("q 1"), ErrorCode::kBadArity);
  EXPECT_EQ(code_of("qh /a 1"), ErrorCode::kBadArity);
  EXPECT_EQ(code_of("qa 2"), ErrorCode::kBadArity);
  EXPECT_EQ(code_of("q /a abc"), ErrorCode::kBadParam);
  EXPECT_EQ(code_of("q /a -1"), ErrorCode::kBadParam);
  EXPECT_EQ(code_of("q /a 0"), ErrorCode::kBadParam);
  EXPECT_EQ(code_of("qa /a 0.0"), ErrorCode::kBadParam);
  EXPECT_EQ(code_of("qh /a 1e3 5"), ErrorCode::kBadParam);
  EXPECT_EQ(code_of("qh /a 0 0"), ErrorCode::kOk);
  // Inverted ranges are a query-time error, not a parse error.
  EXPECT_EQ(code_of("qh /a 5 1"), ErrorCode::kOk);
}

TEST(ProtocolTest, SecondsAreExact) {
  EXPECT_EQ(parse_seconds("0"), 0u);
  EXPECT_EQ(parse_seconds(".5"), 500'000'000u);
  EXPECT_EQ(parse_seconds("3."), 3'000'000'000u);
  EXPECT_EQ(parse_seconds("0.1"), 100'000'000u);
  EXPECT_EQ(parse_seconds("1.0000000019"), 1'000'000'001u);
  EXPECT_EQ(parse_seconds("18446744073.709551615"), UINT64_MAX);
  EXPECT_THROW(parse_seconds("18446744073.709551616"), Error);
  EXPECT_THROW(parse_seconds("99999999999999999999"), Error);
  EXPECT_THROW(parse_seconds("."), Error);
  EXPECT_THROW(parse_seconds("+1"), Error);
  EXPECT_THROW(parse_seconds("1.2.3"), Error);
  EXPECT_EQ(format_seconds(1'500'000'000), "1.5");
  EXPECT_EQ(format_seconds(7'000'000'000), "7");
  EXPECT_EQ(format_seconds(1), "0.000000001");
}

TEST(ProtocolTest, FormatParseRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    QueryCommand cmd;
    cmd.kind = static_cast<CommandKind>(rng() % 3);
    const size_t n = 1 + rng() % 4;
    for (size_t t = 0; t < n; ++t) {
      cmd.topics.push_back("/t" + std::to_string(rng() % 100) + "/x");
    }
    switch (cmd.kind) {
      case CommandKind::kLatest:
        cmd.time_len_ns = 1 + rng() % (uint64_t{1} << 50);
        break;
      case CommandKind::kHistory:
        cmd.start_ns = rng();
        cmd.end_ns = rng();
        break;
      case CommandKind::kAuto:
        cmd.target_ns = 1 + rng() % 10'000'000'000ULL;
        break;
    }
    ASSERT_EQ(parse_command(format_command(cmd)), cmd) << format_command(cmd);
  }
}

TEST(ProtocolTest, ParserIsTotal) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "qha /.0123456789-+e\t\nxQ";
  for (int i = 0; i < 20000; ++i) {
    std::string line;
    const size_t len = rng() % 24;
    for (size_t k = 0; k < len; ++k) {
      line += rng() % 8 == 0 ? static_cast<char>(rng()) : alphabet[rng() % alphabet.size()];
    }
    try {
      parse_command(line);
    } catch (const Error& e) {
      const auto c = e.code();
      ASSERT_TRUE(c == ErrorCode::kBadCommand || c == ErrorCode::kBadArity || c == ErrorCode::kBadParam) << line;
    }
  }
}

ResponseFrame sample_frame(std::mt19937_64& rng, size_t count) {
  ResponseFrame f;
  for (size_t i = 0; i < count; ++i) {
    f.messages.push_back(Message{rng(), "/topic" + std::to_string(rng() % 5), testing::random_bytes(rng, rng() % 200)});
  }
  return f;
}

TEST(FrameTest, RoundTrip) {
  std::mt19937_64 rng(9);
  for (size_t count : {0, 1, 7, 300}) {
    const auto f = sample_frame(rng, count);
    const auto bytes = encode_response(f);
    EXPECT_EQ(bytes.size(), encoded_response_size(f));
    EXPECT_EQ(decode_response(bytes), f);
  }
  const auto err = ResponseFrame::error(ErrorCode::kUnknownTopic, "unknown topic '/x'");
  const auto bytes = encode_response(err);
  EXPECT_EQ(bytes.size(), encoded_response_size(err));
  EXPECT_EQ(decode_response(bytes), err);
  try {
    unwrap_response(decode_response(bytes));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownTopic);
    EXPECT_STREQ(e.what(), "unknown topic '/x'");
  }
}

TEST(FrameTest, HeaderLayout) {
  ResponseFrame f;
  f.messages.push_back(Message{0x0102030405060708ULL, "/a", Bytes{0xee}});
  const auto b = encode_response(f);
  ASSERT_EQ(b.size(), 12u + 2 + 2 + 8 + 4 + 1);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "RFSR");
  EXPECT_EQ(b[4], kProtocolVersion);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(load_le<uint16_t>(b.data() + 6), 0u);
  EXPECT_EQ(load_le<uint32_t>(b.data() + 8), 1u);
  EXPECT_EQ(load_le<uint16_t>(b.data() + 12), 2u);
  EXPECT_EQ(load_le<uint64_t>(b.data() + 16), 0x0102030405060708ULL);
  EXPECT_EQ(load_le<uint32_t>(b.data() + 24), 1u);
  EXPECT_EQ(b.back(), 0xee);
}

TEST(FrameTest, TruncationAndTrailingBytesAreBadFrame) {
  std::mt19937_64 rng(10);
  const auto bytes = encode_response(sample_frame(rng, 4));
  for (size_t n = 0; n < bytes.size(); ++n) {
    try {
      decode_response(ByteView(bytes).first(n));
      FAIL() << n;
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kBadFrame) << n;
    }
  }
  Bytes extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_response(extra), Error);
}

TEST(FrameTest, MutationsGiveBadFrameOrAFrame) {
  std::mt19937_64 rng(12);
  const auto bytes = encode_response(sample_frame(rng, 6));
  for (int i = 0; i < 5000; ++i) {
    Bytes m = bytes;
    const int edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < edits; ++e) {
      m[rng() % m.size()] = static_cast<uint8_t>(rng());
    }
    try {
      decode_response(m);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kBadFrame);
    }
  }
}

TEST(FrameTest, StreamingReaderMatchesDecoder) {
  std::mt19937_64 rng(13);
  const auto f = sample_frame(rng, 50);
  const auto bytes = encode_response(f);
  size_t pos = 0;
  const auto got = read_response([&](std::span<uint8_t> dst) {
    if (dst.size() > bytes.size() - pos) {
      throw Error(ErrorCode::kIoError, "eof");
    }
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  });
  EXPECT_EQ(got, f);
  EXPECT_EQ(pos, bytes.size());
}

TEST(FrameTest, HugeLengthFieldDoesNotAllocateUpFront) {
  ResponseFrame f;
  f.messages.push_back(Message{1, "/a", Bytes(4, 1)});
  Bytes bytes = encode_response(f);
  // Claim a 1.5 GiB payload but deliver only the 4 bytes present.
  const size_t len_at = 12 + 2 + 2 + 8;
  const uint32_t huge = 1536u * 1024 * 1024;
  std::memcpy(bytes.data() + len_at, &huge, 4);
  size_t pos = 0;
  try {
    read_response([&](std::span<uint8_t> dst) {
      if (dst.size() > bytes.size() - pos) {
        throw Error(ErrorCode::kIoError, "eof");
      }
      std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
      pos += dst.size();
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

}  // namespace
}  // namespace brickstore
