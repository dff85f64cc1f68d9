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

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "brickstore/error.hpp"
#include "brickstore/time_index.hpp"
#include "support.hpp"

namespace brickstore {
namespace {

using testing::TempDir;

// Entries with offsets that encode their own position: every topic's frames
// are 100 bytes, so offset = 100 * (rank within topic) and end = offset + 100.
std::vector<IndexEntry> make_entries(std::mt19937_64& rng, size_t n, uint32_t topics, uint64_t max_step) {
  std::vector<IndexEntry> out;
  std::vector<uint64_t> next_offset(topics, 0);
  std::vector<std::optional<IndexKey>> last(topics);
  uint64_t ts = 1;
  for (size_t i = 0; i < n; ++i) {
    ts += rng() % (max_step + 1);
    const uint32_t topic = static_cast<uint32_t>(rng() % topics);
    uint32_t seq = 0;
    if (last[topic] && last[topic]->timestamp == ts) {
      seq = last[topic]->seq + 1;
    }
    IndexKey key{ts, topic, seq};
    last[topic] = key;
    out.push_back(IndexEntry{key, next_offset[topic]});
    next_offset[topic] += 100;
  }
  return out;
}

uint64_t plus_frame(uint32_t, uint64_t offset) { return offset + 100; }

TEST(TimeIndexTest, FanoutMatchesPageLayout) {
  EXPECT_EQ(kIndexFanout, 170u);
}

TEST(TimeIndexTest, EmptyIndex) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexReader reader(path);
  const auto snap = reader.snapshot();
  EXPECT_FALSE(snap.watermark);
  EXPECT_EQ(snap.entry_count, 0u);
  EXPECT_TRUE(reader.entries(snap).empty());
  const uint32_t ids[] = {0};
  try {
    reader.search_latest(ids, 10, plus_frame);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyIndex);
  }
  EXPECT_NO_THROW(recover_index(path));
}

TEST(TimeIndexTest, TenThousandRandomInsertsStaySorted) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  std::mt19937_64 rng(11);
  auto entries = make_entries(rng, 10000, 5, 50);
  // Publish in shuffled batches so inserts land all over the tree.
  auto shuffled = entries;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (size_t i = 0; i < shuffled.size();) {
    const size_t end = std::min(shuffled.size(), i + 1 + rng() % 700);
    writer.flush(std::vector<IndexEntry>(shuffled.begin() + static_cast<long>(i),
                                         shuffled.begin() + static_cast<long>(end)));
    i = end;
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  TimeIndexReader reader(path);
  const auto snap = reader.snapshot();
  EXPECT_EQ(snap.entry_count, entries.size());
  EXPECT_EQ(reader.entries(snap), entries);
  EXPECT_EQ(snap.watermark, entries.back().key);
  const auto report = recover_index(path, false);
  EXPECT_EQ(report.header.entry_count, entries.size());
  EXPECT_GT(report.internal_pages, 0u);
}

TEST(TimeIndexTest, AppendOnlyLeavesArePacked) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  std::vector<IndexEntry> batch;
  for (uint64_t i = 0; i < 170 * 40; ++i) {
    batch.push_back(IndexEntry{IndexKey{i + 1, 0, 0}, i * 100});
  }
  writer.flush(batch);
  const auto report = recover_index(path, false);
  // Appending at the right edge fills each leaf before splitting.
  EXPECT_EQ(report.leaf_pages, 40u);
}

TEST(TimeIndexTest, RangeSearchMatchesBruteForce) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  std::mt19937_64 rng(5);
  const uint32_t topics = 6;
  const auto entries = make_entries(rng, 1000, topics, 20);
  writer.flush(entries);
  TimeIndexReader reader(path, TimeIndexReader::Access::kPread);
  const uint64_t max_ts = entries.back().key.timestamp;
  std::vector<uint32_t> all_ids(topics);
  for (uint32_t i = 0; i < topics; ++i) {
    all_ids[i] = i;
  }
  for (int q = 0; q < 100; ++q) {
    uint64_t a = rng() % (max_ts + 10);
    uint64_t b = rng() % (max_ts + 10);
    if (a > b) {
      std::swap(a, b);
    }
    const auto got = reader.search_range(a, b, all_ids, plus_frame);
    for (uint32_t t = 0; t < topics; ++t) {
      OffsetRange want;
      bool any = false;
      for (const auto& e : entries) {
        if (e.key.topic_id == t && e.key.timestamp >= a && e.key.timestamp <= b) {
          if (!any) {
            want.start = e.offset;
            any = true;
          }
          want.end = e.offset + 100;
        }
      }
      ASSERT_EQ(got.at(t), want) << "query " << q << " topic " << t << " [" << a << "," << b << "]";
    }
  }
}

TEST(TimeIndexTest, LatestWindowIsHalfOpen) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  // topic 2 at ts 1..9, as in a three-topic container whose newest message is at 9.
  std::vector<IndexEntry> batch;
  for (uint64_t ts = 1; ts <= 9; ++ts) {
    batch.push_back(IndexEntry{IndexKey{ts, 2, 0}, (ts - 1) * 100});
    batch.push_back(IndexEntry{IndexKey{ts, 0, 0}, (ts - 1) * 100});
  }
  writer.flush(batch);
  TimeIndexReader reader(path);
  const uint32_t ids[] = {2};
  auto got = reader.search_latest(ids, 1, plus_frame);
  EXPECT_EQ(got.at(2), (OffsetRange{800, 900}));  // only ts 9
  got = reader.search_latest(ids, 3, plus_frame);
  EXPECT_EQ(got.at(2), (OffsetRange{600, 900}));  // ts 7, 8, 9
  got = reader.search_latest(ids, 1000, plus_frame);
  EXPECT_EQ(got.at(2), (OffsetRange{0, 900}));
}

TEST(TimeIndexTest, UnindexedTopicIsUnknown) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  writer.flush({IndexEntry{IndexKey{5, 0, 0}, 0}});
  TimeIndexReader reader(path);
  const uint32_t ids[] = {3};
  try {
    reader.search_range(0, 10, ids, plus_frame);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownTopic);
  }
}

TEST(TimeIndexTest, EmptyFlushLeavesFileUntouched) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  writer.flush({IndexEntry{IndexKey{5, 0, 0}, 0}});
  const auto size = std::filesystem::file_size(path);
  const auto header = writer.header();
  writer.flush(std::vector<IndexEntry>{});
  EXPECT_EQ(std::filesystem::file_size(path), size);
  EXPECT_EQ(writer.header(), header);
  EXPECT_EQ(TimeIndexReader(path).snapshot(), header);
}

TEST(TimeIndexTest, ReaderFollowsGrowingFile) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  TimeIndexReader mapped(path, TimeIndexReader::Access::kMmap);
  TimeIndexReader pread(path, TimeIndexReader::Access::kPread);
  uint64_t ts = 1;
  for (int round = 0; round < 30; ++round) {
    std::vector<IndexEntry> batch;
    for (int i = 0; i < 300; ++i, ++ts) {
      batch.push_back(IndexEntry{IndexKey{ts, static_cast<uint32_t>(ts % 3), 0}, ts * 10});
    }
    writer.flush(batch);
    const auto a = mapped.snapshot();
    const auto b = pread.snapshot();
    ASSERT_EQ(a, writer.header());
    ASSERT_EQ(b, writer.header());
    ASSERT_EQ(mapped.entries(a).size(), ts - 1);
    ASSERT_EQ(pread.entries(b), mapped.entries(a));
  }
}

TEST(TimeIndexTest, OldSnapshotStaysReadableAfterFlush) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  TimeIndexWriter writer(path);
  std::mt19937_64 rng(9);
  auto first = make_entries(rng, 2000, 3, 5);
  writer.flush(first);
  TimeIndexReader reader(path);
  const auto old = reader.snapshot();
  // Inserts that land in the middle of the existing tree.
  std::vector<IndexEntry> more;
  for (const auto& e : first) {
    if (e.key.seq == 0 && rng() % 3 == 0) {
      more.push_back(IndexEntry{IndexKey{e.key.timestamp, e.key.topic_id + 3, 0}, e.offset});
    }
  }
  writer.flush(more);
  std::sort(first.begin(), first.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  EXPECT_EQ(reader.entries(old), first);
  EXPECT_EQ(reader.entries(reader.snapshot()).size(), first.size() + more.size());
}

TEST(TimeIndexTest, CrashBeforeHeaderKeepsPreviousState) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  IndexHeader published;
  {
    TimeIndexWriter writer(path);
    writer.flush({IndexEntry{IndexKey{1, 0, 0}, 0}, IndexEntry{IndexKey{2, 0, 0}, 100}});
    published = writer.header();
    writer.set_fault_hook([](TimeIndexWriter::FlushStage stage) {
      if (stage == TimeIndexWriter::FlushStage::kBeforeHeader) {
        throw Error(ErrorCode::kIoError, "injected");
      }
    });
    std::vector<IndexEntry> batch;
    for (uint64_t i = 0; i < 1000; ++i) {
      batch.push_back(IndexEntry{IndexKey{3 + i, 0, 0}, 200 + i * 100});
    }
    EXPECT_THROW(writer.flush(batch), Error);
    EXPECT_EQ(writer.header(), published);
  }
  EXPECT_GT(std::filesystem::file_size(path), published.page_count * kIndexPageSize);
  const auto report = recover_index(path, true);
  EXPECT_EQ(report.header, published);
  EXPECT_GT(report.truncated_bytes, 0u);
  EXPECT_EQ(std::filesystem::file_size(path), published.page_count * kIndexPageSize);

  // The writer reopens on the recovered file and continues.
  TimeIndexWriter writer(path);
  writer.flush({IndexEntry{IndexKey{3, 0, 0}, 200}});
  EXPECT_EQ(TimeIndexReader(path).entries(writer.header()).size(), 3u);
}

TEST(TimeIndexTest, TornHeaderSlotFallsBackToOtherCopy) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  IndexHeader first;
  IndexHeader second;
  {
    TimeIndexWriter writer(path);
    writer.flush({IndexEntry{IndexKey{1, 0, 0}, 0}});
    first = writer.header();
    writer.flush({IndexEntry{IndexKey{2, 0, 0}, 100}});
    second = writer.header();
  }
  // Scribble over the newer slot.
  File f(path, File::Mode::kReadWrite);
  const uint64_t slot = (second.flush_seq % 2) * kIndexHeaderSlotSize;
  const Bytes junk(64, 0x5a);
  f.pwrite_all(junk, slot + 8);
  f.close();
  EXPECT_EQ(TimeIndexReader(path).snapshot(), first);
}

TEST(TimeIndexTest, HeaderSlotCodecRoundTrip) {
  IndexHeader h;
  h.flush_seq = 7;
  h.root_page = 12;
  h.page_count = 40;
  h.entry_count = 9999;
  h.garbage_pages = 3;
  h.height = 3;
  h.topic_limit = 6;
  h.watermark = IndexKey{123456789, 4, 2};
  Bytes page(kIndexPageSize, 0);
  const auto slot = encode_index_header_slot(h);
  ASSERT_EQ(slot.size(), kIndexHeaderSlotSize);
  std::copy(slot.begin(), slot.end(), page.begin() + (h.flush_seq % 2) * kIndexHeaderSlotSize);
  EXPECT_EQ(decode_index_header_page(page), h);
  std::fill(page.begin(), page.end(), 0);
  EXPECT_THROW(decode_index_header_page(page), Error);
}

TEST(TimeIndexTest, FlippedPageByteIsDetected) {
  TempDir dir("idx");
  const auto path = dir / "time.idx";
  TimeIndexWriter::initialize(path);
  {
    TimeIndexWriter writer(path);
    std::vector<IndexEntry> batch;
    for (uint64_t i = 0; i < 2000; ++i) {
      batch.push_back(IndexEntry{IndexKey{i + 1, 0, 0}, i * 100});
    }
    writer.flush(batch);
  }
  File f(path, File::Mode::kReadWrite);
  const uint8_t bad[1] = {0xff};
  f.pwrite_all(bad, 3 * kIndexPageSize + 100);
  f.close();
  try {
    recover_index(path, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptIndex);
    EXPECT_EQ(e.position(), 3u);
  }
}

TEST(IndexCacheTest, RejectsRegressionPerTopic) {
  IndexCache cache;
  cache.insert(IndexEntry{IndexKey{10, 0, 0}, 0});
  cache.insert(IndexEntry{IndexKey{5, 1, 0}, 0});  // other topic may be older
  cache.insert(IndexEntry{IndexKey{10, 0, 1}, 12});
  EXPECT_THROW(cache.insert(IndexEntry{IndexKey{10, 0, 1}, 24}), Error);
  EXPECT_THROW(cache.insert(IndexEntry{IndexKey{9, 0, 0}, 24}), Error);
  EXPECT_EQ(cache.pending(), 3u);
  const auto taken = cache.take();
  ASSERT_EQ(taken.size(), 3u);
  EXPECT_TRUE(std::is_sorted(taken.begin(), taken.end(),
                             [](const auto& a, const auto& b) { return a.key < b.key; }));
  EXPECT_EQ(cache.pending(), 0u);
}

}  // namespace
}  // namespace brickstore
