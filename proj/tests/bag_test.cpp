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

#include "brickstore/bag.hpp"
#include "brickstore/error.hpp"
#include "brickstore/query.hpp"
#include "brickstore/synth.hpp"
#include "support.hpp"

namespace brickstore {
namespace {

using testing::TempDir;

Bytes str_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

template <typename T>
Bytes le_bytes(T v) {
  Bytes b;
  put_le<T>(b, v);
  return b;
}

void append_record(Bytes& out, const std::vector<std::pair<std::string, Bytes>>& fields, ByteView data) {
  const Bytes header = bag::encode_header_fields(fields);
  put_le<uint32_t>(out, static_cast<uint32_t>(header.size()));
  put_bytes(out, header);
  put_le<uint32_t>(out, static_cast<uint32_t>(data.size()));
  put_bytes(out, data);
}

ErrorCode open_error(Bytes bytes) {
  try {
    auto reader = BagReader::open_memory(std::move(bytes));
    while (reader->next()) {
    }
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

// 100 messages alternating over two connections.
std::vector<BagMessage> two_topic_messages(std::mt19937_64& rng) {
  std::vector<BagMessage> msgs;
  uint64_t ts = 1'600'000'000'000'000'000ULL;
  for (uint32_t i = 0; i < 100; ++i) {
    ts += 1 + rng() % 50'000'000;
    msgs.push_back(BagMessage{i % 2, ts, testing::random_bytes(rng, rng() % 3000)});
  }
  return msgs;
}

const std::vector<bag::Connection> kTwoConnections = {
    {0, "/chatter", "std_msgs/String", "992ce8a1687cec8c8bd883ec73ca41d1", "string data\n"},
    {1, "/imu", "sensor_msgs/Imu", "*", ""},
};

TEST(BagTimeTest, RosTimeEncoding) {
  Bytes b;
  bag::encode_time(b, 12'345'678'901ULL);
  ASSERT_EQ(b.size(), 8u);
  EXPECT_EQ(load_le<uint32_t>(b.data()), 12u);
  EXPECT_EQ(load_le<uint32_t>(b.data() + 4), 345'678'901u);
  EXPECT_EQ(bag::decode_time(b), 12'345'678'901ULL);
  store_le<uint32_t>(b.data() + 4, 1'000'000'000u);
  EXPECT_THROW(bag::decode_time(b), Error);
}

TEST(BagTest, WriteReadRoundTrip) {
  TempDir dir("bag");
  std::mt19937_64 rng(4);
  const auto msgs = two_topic_messages(rng);
  // Small chunks so the bag has many of them.
  write_bag(dir / "x.bag", msgs, kTwoConnections, BagWriterOptions{16 * 1024});
  auto reader = BagReader::open_file(dir / "x.bag");
  EXPECT_GT(reader->header().chunk_count, 3u);
  EXPECT_EQ(reader->header().conn_count, 2u);
  EXPECT_EQ(reader->connections(), kTwoConnections);
  for (const auto& m : msgs) {
    const auto got = reader->next();
    ASSERT_TRUE(got);
    EXPECT_EQ(got->timestamp, m.timestamp);
    EXPECT_EQ(got->topic, kTwoConnections[m.conn].topic);
    EXPECT_EQ(got->payload, m.data);
  }
  EXPECT_FALSE(reader->next());
  EXPECT_EQ(reader->messages_read(), 100u);
  EXPECT_EQ(reader->message_type("/imu"), "sensor_msgs/Imu");
  // Header is padded so it can be rewritten in place.
  const auto bytes = read_file(dir / "x.bag");
  EXPECT_EQ(bytes.substr(0, bag::kMagic.size()), bag::kMagic);
}

TEST(BagTest, EmptyBag) {
  TempDir dir("bag");
  write_bag(dir / "e.bag", {}, kTwoConnections);
  auto reader = BagReader::open_file(dir / "e.bag");
  EXPECT_EQ(reader->header().chunk_count, 0u);
  EXPECT_FALSE(reader->next());
  EXPECT_EQ(reader->connections().size(), 2u);
}

TEST(BagTest, NotABag) {
  EXPECT_EQ(open_error({}), ErrorCode::kNotABag);
  EXPECT_EQ(open_error(str_bytes("#ROSBAG V1.2\nxxxxxxxxxxxxxxxx")), ErrorCode::kNotABag);
  EXPECT_EQ(open_error(str_bytes("hello world, this is text")), ErrorCode::kNotABag);
}

TEST(BagTest, CompressedChunkIsUnsupported) {
  Bytes b = str_bytes(bag::kMagic);
  append_record(b,
                {{"op", Bytes{0x03}},
                 {"index_pos", le_bytes<uint64_t>(0)},
                 {"conn_count", le_bytes<uint32_t>(0)},
                 {"chunk_count", le_bytes<uint32_t>(1)}},
                {});
  const uint64_t chunk_at = b.size();
  append_record(b, {{"op", Bytes{0x05}}, {"compression", str_bytes("bz2")}, {"size", le_bytes<uint32_t>(10)}},
                Bytes(4, 0));
  try {
    auto reader = BagReader::open_memory(b);
    reader->next();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedCompression);
    EXPECT_EQ(e.position(), chunk_at);
  }
}

TEST(BagTest, TruncationIsCorruptBag) {
  TempDir dir("bag");
  std::mt19937_64 rng(5);
  write_bag(dir / "t.bag", two_topic_messages(rng), kTwoConnections, BagWriterOptions{8 * 1024});
  const auto text = read_file(dir / "t.bag");
  const Bytes full(text.begin(), text.end());
  for (size_t cut : {full.size() - 1, full.size() - 30, full.size() / 2, size_t{4200}, size_t{20}}) {
    Bytes part(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto code = open_error(part);
    EXPECT_TRUE(code == ErrorCode::kCorruptBag) << cut << " " << error_code_name(code);
  }
}

TEST(BagTest, MutationsNeverCrash) {
  TempDir dir("bag");
  std::mt19937_64 rng(6);
  auto msgs = two_topic_messages(rng);
  msgs.resize(20);
  write_bag(dir / "m.bag", msgs, kTwoConnections, BagWriterOptions{2 * 1024});
  const auto text = read_file(dir / "m.bag");
  const Bytes full(text.begin(), text.end());
  for (int i = 0; i < 3000; ++i) {
    Bytes m = full;
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      // Bias edits toward the record area past the padded bag header.
      const size_t at = rng() % 2 == 0 ? rng() % m.size() : 4096 + rng() % (m.size() - 4096);
      m[at] = static_cast<uint8_t>(rng());
    }
    try {
      read_bag_messages(m);
    } catch (const Error& e) {
      const auto c = e.code();
      ASSERT_TRUE(c == ErrorCode::kCorruptBag || c == ErrorCode::kNotABag ||
                  c == ErrorCode::kUnsupportedCompression)
          << error_code_name(c);
    }
  }
}

TEST(BagTest, SlamConnectionsAndConversion) {
  TempDir dir("bag");
  const auto w = workload_preset("slam", 1.0);
  std::vector<bag::Connection> conns;
  for (uint32_t i = 0; i < w.topics.size(); ++i) {
    conns.push_back(bag::Connection{i, w.topics[i].name, w.topics[i].type, "*", ""});
  }
  SynthSource src(w);
  std::vector<BagMessage> msgs;
  while (auto m = src.next()) {
    const auto trailer = decode_synth_trailer(m->payload);
    ASSERT_TRUE(trailer);
    msgs.push_back(BagMessage{trailer->topic_index, m->timestamp, m->payload});
  }
  write_bag(dir / "slam.bag", msgs, conns);
  auto reader = BagReader::open_file(dir / "slam.bag");
  EXPECT_EQ(reader->connections(), conns);

  const auto meta = convert_bag_to_container(dir / "slam.bag", dir / "c");
  EXPECT_EQ(meta.message_count(), msgs.size());
  ASSERT_EQ(meta.topic_count(), 6u);
  for (size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(meta.topics[i].type, w.topics[i].type);
  }
  QueryEngine engine(dir / "c");
  std::vector<std::string> names;
  for (const auto& t : w.topics) {
    names.push_back(t.name);
  }
  const auto all = engine.history(names, 0, UINT64_MAX);
  EXPECT_EQ(all.messages.size(), msgs.size());
  for (const auto& m : all.messages) {
    ASSERT_TRUE(verify_synth_payload(w, m.payload));
  }
}

}  // namespace
}  // namespace brickstore
