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

#include <random>

#include "brickstore/container.hpp"
#include "brickstore/error.hpp"
#include "support.hpp"

namespace brickstore {
namespace {

using testing::TempDir;

Message msg(uint64_t ts, size_t payload_len, uint8_t fill = 0xab) {
  return Message{ts, "/t", Bytes(payload_len, fill)};
}

TEST(BrickTest, OffsetsFollowFrameLengths) {
  TempDir dir("brick");
  auto writer = ContainerWriter::create(dir / "c");
  writer.add_brick(0);
  // 12-byte header per frame: 0, 0+12+10, 22+12+20.
  EXPECT_EQ(writer.append_record(0, msg(1, 10)), 0u);
  EXPECT_EQ(writer.append_record(0, msg(2, 20)), 22u);
  EXPECT_EQ(writer.append_record(0, msg(3, 30)), 54u);
  EXPECT_EQ(writer.brick_size(0), 96u);

  BrickReader reader(layout::brick_path(dir / "c", 0));
  const auto rec = reader.read_record_at(22);
  EXPECT_EQ(rec.timestamp, 2u);
  EXPECT_EQ(rec.payload, Bytes(20, 0xab));
  EXPECT_EQ(reader.record_end(22), 54u);
}

TEST(BrickTest, RandomAppendsReadBackSequentially) {
  TempDir dir("brick");
  auto writer = ContainerWriter::create(dir / "c");
  writer.add_brick(0);
  std::mt19937_64 rng(7);
  std::vector<Record> expect;
  uint64_t ts = 1;
  for (int i = 0; i < 1000; ++i) {
    ts += rng() % 3;
    // Mix of tiny frames and frames larger than the read window.
    const size_t len = rng() % 50 == 0 ? (1 << 20) + rng() % 5000 : rng() % 300;
    Message m{ts, "/t", testing::random_bytes(rng, len)};
    const uint64_t off = writer.append_record(0, m);
    expect.push_back(Record{off, ts, m.payload});
  }
  BrickReader reader(layout::brick_path(dir / "c", 0));
  const auto all = reader.read_sequential(0, writer.brick_size(0));
  ASSERT_EQ(all.size(), expect.size());
  for (size_t i = 0; i < all.size(); ++i) {
    ASSERT_EQ(all[i], expect[i]) << i;
    if (i + 1 < all.size()) {
      ASSERT_EQ(all[i].end_offset(), all[i + 1].offset);
    }
  }
  // Sub-range between frame boundaries.
  const auto part = reader.read_sequential(expect[5].offset, expect[17].offset);
  ASSERT_EQ(part.size(), 12u);
  EXPECT_EQ(part.front(), expect[5]);
  EXPECT_EQ(part.back(), expect[16]);
}

TEST(BrickTest, RejectsDecreasingTimestamp) {
  TempDir dir("brick");
  auto writer = ContainerWriter::create(dir / "c");
  writer.add_brick(0);
  writer.append_record(0, msg(10, 1));
  writer.append_record(0, msg(10, 1));
  try {
    writer.append_record(0, msg(9, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfOrderTimestamp);
  }
}

TEST(BrickTest, ZeroTimestampIsInvalid) {
  TempDir dir("brick");
  auto writer = ContainerWriter::create(dir / "c");
  writer.add_brick(0);
  try {
    writer.append_record(0, msg(0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidMessage);
  }
}

TEST(BrickTest, ReadsPastEndFail) {
  TempDir dir("brick");
  auto writer = ContainerWriter::create(dir / "c");
  writer.add_brick(0);
  writer.append_record(0, msg(1, 10));
  BrickReader reader(layout::brick_path(dir / "c", 0));
  try {
    reader.read_record_at(22);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfBounds);
  }
  try {
    reader.read_sequential(0, 23);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfBounds);
  }
}

TEST(BrickTest, TruncatedFrameIsCorrupt) {
  TempDir dir("brick");
  {
    auto writer = ContainerWriter::create(dir / "c");
    writer.add_brick(0);
    writer.append_record(0, msg(1, 100));
  }
  std::filesystem::resize_file(layout::brick_path(dir / "c", 0), 50);
  BrickReader reader(layout::brick_path(dir / "c", 0));
  try {
    reader.read_record_at(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptRecord);
    EXPECT_EQ(e.position(), 0u);
  }
}

TEST(ContainerTest, CreateRefusesNonEmptyDirectory) {
  TempDir dir("c");
  { ContainerWriter::create(dir / "c"); }
  try {
    ContainerWriter::create(dir / "c");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlreadyExists);
  }
}

TEST(ContainerTest, FreshContainerLayout) {
  TempDir dir("c");
  { ContainerWriter::create(dir / "c"); }
  EXPECT_TRUE(std::filesystem::exists(layout::metadata_path(dir / "c")));
  EXPECT_TRUE(std::filesystem::exists(layout::index_path(dir / "c")));
  const auto meta = read_metadata(dir / "c");
  EXPECT_EQ(meta.topic_count(), 0u);
  EXPECT_EQ(meta.start_timestamp, 0u);
  EXPECT_EQ(meta.end_timestamp, 0u);
}

TEST(MetadataTest, RoundTrip) {
  ContainerMetadata meta;
  meta.start_timestamp = 5;
  meta.end_timestamp = 900;
  meta.topics.push_back(TopicInfo{0, "/camera/depth/image", "sensor_msgs/Image", 10, 1000, 5, 900});
  meta.topics.push_back(TopicInfo{1, "/name with spaces=and equals", "", 0, 0, 0, 0});
  const auto text = encode_metadata(meta);
  EXPECT_EQ(decode_metadata(text), meta);
  EXPECT_EQ(meta.message_count(), 10u);
}

TEST(MetadataTest, MalformedInputsAreCorruptMetadata) {
  const std::vector<std::string> bad = {
      "",
      "garbage",
      "BRICKSTORE-METADATA 1\nformat_version=1\ntopic_count=1\nstart_timestamp=0\nend_timestamp=0\n",
      "BRICKSTORE-METADATA 1\nformat_version=x\n",
  };
  for (const auto& text : bad) {
    try {
      decode_metadata(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruptMetadata) << text;
    }
  }
}

TEST(MetadataTest, MutationsNeverCrash) {
  ContainerMetadata meta;
  meta.start_timestamp = 1;
  meta.end_timestamp = 2;
  meta.topics.push_back(TopicInfo{0, "/a", "t", 2, 4, 1, 2});
  const auto text = encode_metadata(meta);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::string m = text;
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      m[rng() % m.size()] = static_cast<char>(rng());
    }
    try {
      decode_metadata(m);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruptMetadata);
    }
  }
}

TEST(MetadataTest, TopicNameValidation) {
  EXPECT_THROW(validate_topic_name(""), Error);
  EXPECT_THROW(validate_topic_name("a\nb"), Error);
  EXPECT_NO_THROW(validate_topic_name("/imu"));
}

}  // namespace
}  // namespace brickstore
