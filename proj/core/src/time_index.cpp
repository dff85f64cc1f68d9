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

#include "brickstore/time_index.hpp"

#include <sys/mman.h>
#include <zlib.h>

#include <algorithm>
#include <limits>
#include <unordered_set>

#include "brickstore/error.hpp"

namespace brickstore {

namespace {

constexpr uint8_t kLeafKind = 1;
constexpr uint8_t kInternalKind = 2;
constexpr char kIndexMagic[4] = {'T', 'I', 'D', 'X'};
// Encoded header fields before the trailing crc.
constexpr size_t kHeaderBodySize = 4 + 4 * 3 + 8 * 5 + 4 * 2 + 4 + 8 + 4 + 4;

uint32_t checksum(const uint8_t* data, size_t len) {
  return static_cast<uint32_t>(::crc32(0L, data, static_cast<uInt>(len)));
}

[[noreturn]] void corrupt_page(uint64_t page, const std::string& what) {
  throw Error(ErrorCode::kCorruptIndex, "time index page " + std::to_string(page) + ": " + what, page);
}

void encode_key(uint8_t* dst, const IndexKey& key) {
  store_le<uint64_t>(dst, key.timestamp);
  store_le<uint32_t>(dst + 8, key.topic_id);
  store_le<uint32_t>(dst + 12, key.seq);
}

IndexKey decode_key(const uint8_t* src) {
  return {load_le<uint64_t>(src), load_le<uint32_t>(src + 8), load_le<uint32_t>(src + 12)};
}

void encode_node(uint8_t* page, const detail::IndexNode& node, uint64_t page_id) {
  std::fill_n(page, kIndexPageSize, uint8_t{0});
  page[4] = node.leaf ? kLeafKind : kInternalKind;
  store_le<uint16_t>(page + 6, static_cast<uint16_t>(node.keys.size()));
  store_le<uint64_t>(page + 8, page_id);
  uint8_t* slot = page + kIndexNodeHeader;
  for (size_t i = 0; i < node.keys.size(); ++i, slot += kIndexSlotSize) {
    encode_key(slot, node.keys[i]);
    store_le<uint64_t>(slot + 16, node.values[i]);
  }
  store_le<uint32_t>(page, checksum(page + 4, kIndexPageSize - 4));
}

detail::IndexNode decode_node(const uint8_t* page, uint64_t page_id) {
  if (load_le<uint32_t>(page) != checksum(page + 4, kIndexPageSize - 4)) {
    corrupt_page(page_id, "checksum mismatch");
  }
  const uint8_t kind = page[4];
  if (kind != kLeafKind && kind != kInternalKind) {
    corrupt_page(page_id, "unknown node kind");
  }
  const uint16_t count = load_le<uint16_t>(page + 6);
  if (count == 0 || count > kIndexFanout) {
    corrupt_page(page_id, "bad entry count " + std::to_string(count));
  }
  if (load_le<uint64_t>(page + 8) != page_id) {
    corrupt_page(page_id, "page id mismatch");
  }
  detail::IndexNode node;
  node.leaf = kind == kLeafKind;
  node.keys.resize(count);
  node.values.resize(count);
  const uint8_t* slot = page + kIndexNodeHeader;
  for (size_t i = 0; i < count; ++i, slot += kIndexSlotSize) {
    node.keys[i] = decode_key(slot);
    node.values[i] = load_le<uint64_t>(slot + 16);
  }
  return node;
}

std::optional<IndexHeader> decode_slot(const uint8_t* slot) {
  if (!std::equal(kIndexMagic, kIndexMagic + 4, slot)) {
    return std::nullopt;
  }
  if (load_le<uint32_t>(slot + kHeaderBodySize) != checksum(slot, kHeaderBodySize)) {
    return std::nullopt;
  }
  IndexHeader h;
  const uint8_t* p = slot + 4;
  h.version = load_le<uint32_t>(p); p += 4;
  h.page_size = load_le<uint32_t>(p); p += 4;
  h.checksum_algorithm = load_le<uint32_t>(p); p += 4;
  h.flush_seq = load_le<uint64_t>(p); p += 8;
  h.root_page = load_le<uint64_t>(p); p += 8;
  h.page_count = load_le<uint64_t>(p); p += 8;
  h.entry_count = load_le<uint64_t>(p); p += 8;
  h.garbage_pages = load_le<uint64_t>(p); p += 8;
  h.height = load_le<uint32_t>(p); p += 4;
  h.topic_limit = load_le<uint32_t>(p); p += 4;
  const uint32_t has_watermark = load_le<uint32_t>(p); p += 4;
  IndexKey wm;
  wm.timestamp = load_le<uint64_t>(p); p += 8;
  wm.topic_id = load_le<uint32_t>(p); p += 4;
  wm.seq = load_le<uint32_t>(p);
  if (has_watermark != 0) {
    h.watermark = wm;
  }
  return h;
}

}  // namespace

Bytes encode_index_header_slot(const IndexHeader& h) {
  Bytes out;
  out.reserve(kIndexHeaderSlotSize);
  put_bytes(out, std::string_view(kIndexMagic, 4));
  put_le<uint32_t>(out, h.version);
  put_le<uint32_t>(out, h.page_size);
  put_le<uint32_t>(out, h.checksum_algorithm);
  put_le<uint64_t>(out, h.flush_seq);
  put_le<uint64_t>(out, h.root_page);
  put_le<uint64_t>(out, h.page_count);
  put_le<uint64_t>(out, h.entry_count);
  put_le<uint64_t>(out, h.garbage_pages);
  put_le<uint32_t>(out, h.height);
  put_le<uint32_t>(out, h.topic_limit);
  put_le<uint32_t>(out, h.watermark ? 1u : 0u);
  const IndexKey wm = h.watermark.value_or(IndexKey{});
  put_le<uint64_t>(out, wm.timestamp);
  put_le<uint32_t>(out, wm.topic_id);
  put_le<uint32_t>(out, wm.seq);
  put_le<uint32_t>(out, checksum(out.data(), out.size()));
  out.resize(kIndexHeaderSlotSize, 0);
  return out;
}

IndexHeader decode_index_header_page(ByteView page) {
  if (page.size() < kIndexPageSize) {
    corrupt_page(0, "short header page");
  }
  std::optional<IndexHeader> best;
  for (size_t slot = 0; slot < 2; ++slot) {
    auto h = decode_slot(page.data() + slot * kIndexHeaderSlotSize);
    if (h && h->flush_seq % 2 == slot && (!best || h->flush_seq > best->flush_seq)) {
      best = h;
    }
  }
  if (!best) {
    corrupt_page(0, "no valid header slot");
  }
  if (best->version != kIndexVersion || best->page_size != kIndexPageSize ||
      best->checksum_algorithm != kChecksumCrc32) {
    corrupt_page(0, "unsupported version, page size or checksum algorithm");
  }
  if (best->page_count == 0 || best->root_page >= best->page_count) {
    corrupt_page(0, "root page outside file");
  }
  return *best;
}

// ---------------------------------------------------------------- cache

void IndexCache::insert(const IndexEntry& entry) {
  std::lock_guard lock(mu_);
  const uint32_t topic = entry.key.topic_id;
  if (topic >= last_per_topic_.size()) {
    last_per_topic_.resize(topic + 1);
  }
  auto& last = last_per_topic_[topic];
  if (last && entry.key <= *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "index key regression on topic " + std::to_string(topic) + " at timestamp " +
                    std::to_string(entry.key.timestamp));
  }
  last = entry.key;
  pending_.push_back(entry);
}

std::vector<IndexEntry> IndexCache::take() {
  std::vector<IndexEntry> out;
  {
    std::lock_guard lock(mu_);
    out.swap(pending_);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

void IndexCache::restore(std::vector<IndexEntry> entries) {
  std::lock_guard lock(mu_);
  pending_.insert(pending_.end(), entries.begin(), entries.end());
}

size_t IndexCache::pending() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

// ---------------------------------------------------------------- writer

void TimeIndexWriter::initialize(const std::filesystem::path& path) {
  File f(path, File::Mode::kCreateNew);
  Bytes page(kIndexPageSize, 0);
  const Bytes slot = encode_index_header_slot(IndexHeader{});
  std::copy(slot.begin(), slot.end(), page.begin());
  f.pwrite_all(page, 0);
  f.datasync();
}

TimeIndexWriter::TimeIndexWriter(const std::filesystem::path& path)
    : file_(path, File::Mode::kReadWrite) {
  Bytes page(kIndexPageSize);
  file_.pread_exact(page, 0);
  header_ = decode_index_header_page(page);
  next_page_ = header_.page_count;
  garbage_ = header_.garbage_pages;
}

TimeIndexWriter::Node TimeIndexWriter::load(uint64_t page) const {
  if (page == 0 || page >= header_.page_count) {
    corrupt_page(page, "reference outside published pages");
  }
  Bytes buf(kIndexPageSize);
  file_.pread_exact(buf, page * kIndexPageSize);
  return decode_node(buf.data(), page);
}

uint64_t TimeIndexWriter::allocate(Node node) {
  const uint64_t id = next_page_++;
  dirty_.emplace(id, std::move(node));
  return id;
}

uint64_t TimeIndexWriter::make_dirty(uint64_t page) {
  if (page >= header_.page_count) {
    return page;  // already a fresh page of this flush
  }
  ++garbage_;
  return allocate(load(page));
}

std::optional<TimeIndexWriter::Split> TimeIndexWriter::split_if_needed(uint64_t page, bool append_split) {
  Node& node = dirty_.at(page);
  if (node.keys.size() <= kIndexFanout) {
    return std::nullopt;
  }
  // Appends at the right edge leave the left leaf full; everything else
  // splits at the midpoint so internal nodes stay at least half full.
  const size_t cut = (append_split && node.leaf) ? node.keys.size() - 1 : (node.keys.size() + 1) / 2;
  Node right;
  right.leaf = node.leaf;
  right.keys.assign(node.keys.begin() + static_cast<ptrdiff_t>(cut), node.keys.end());
  right.values.assign(node.values.begin() + static_cast<ptrdiff_t>(cut), node.values.end());
  node.keys.resize(cut);
  node.values.resize(cut);
  const IndexKey separator = right.keys.front();
  return Split{separator, allocate(std::move(right))};
}

TimeIndexWriter::InsertResult TimeIndexWriter::insert(uint64_t page, const IndexEntry& entry, bool rightmost) {
  const uint64_t id = make_dirty(page);
  Node& node = dirty_.at(id);
  if (node.leaf) {
    auto it = std::lower_bound(node.keys.begin(), node.keys.end(), entry.key);
    if (it != node.keys.end() && *it == entry.key) {
      throw Error(ErrorCode::kOutOfOrderTimestamp, "duplicate index key at timestamp " +
                                                       std::to_string(entry.key.timestamp));
    }
    const auto pos = static_cast<size_t>(it - node.keys.begin());
    node.keys.insert(it, entry.key);
    node.values.insert(node.values.begin() + static_cast<ptrdiff_t>(pos), entry.offset);
    const bool appended = rightmost && pos + 1 == node.keys.size();
    return {id, split_if_needed(id, appended)};
  }

  auto it = std::upper_bound(node.keys.begin(), node.keys.end(), entry.key);
  size_t child = it == node.keys.begin() ? 0 : static_cast<size_t>(it - node.keys.begin()) - 1;
  if (entry.key < node.keys.front()) {
    node.keys.front() = entry.key;
  }
  const bool child_rightmost = rightmost && child + 1 == node.keys.size();
  const InsertResult sub = insert(node.values[child], entry, child_rightmost);
  Node& parent = dirty_.at(id);
  parent.values[child] = sub.page;
  if (sub.split) {
    parent.keys.insert(parent.keys.begin() + static_cast<ptrdiff_t>(child + 1), sub.split->separator);
    parent.values.insert(parent.values.begin() + static_cast<ptrdiff_t>(child + 1), sub.split->right);
  }
  return {id, split_if_needed(id, false)};
}

void TimeIndexWriter::publish(const IndexHeader& next) {
  const Bytes slot = encode_index_header_slot(next);
  file_.pwrite_all(slot, (next.flush_seq % 2) * kIndexHeaderSlotSize);
  file_.datasync();
}

std::optional<IndexKey> TimeIndexWriter::flush(std::vector<IndexEntry> entries) {
  if (entries.empty()) {
    return header_.watermark;
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  IndexHeader next = header_;
  try {
    if (fault_hook_) {
      fault_hook_(FlushStage::kBeforePages);
    }
    next_page_ = header_.page_count;
    garbage_ = header_.garbage_pages;
    uint64_t root = header_.root_page;
    uint32_t height = header_.height;
    for (const auto& e : entries) {
      if (root == 0) {
        root = allocate(Node{true, {e.key}, {e.offset}});
        height = 1;
        continue;
      }
      const InsertResult r = insert(root, e, true);
      root = r.page;
      if (r.split) {
        Node top;
        top.leaf = false;
        top.keys = {dirty_.at(root).keys.front(), r.split->separator};
        top.values = {root, r.split->right};
        root = allocate(std::move(top));
        ++height;
      }
    }

    const uint64_t first_new = header_.page_count;
    Bytes buf((next_page_ - first_new) * kIndexPageSize);
    for (uint64_t id = first_new; id < next_page_; ++id) {
      encode_node(buf.data() + (id - first_new) * kIndexPageSize, dirty_.at(id), id);
    }
    file_.pwrite_all(buf, first_new * kIndexPageSize);
    file_.datasync();
    if (fault_hook_) {
      fault_hook_(FlushStage::kBeforeHeader);
    }

    next.flush_seq = header_.flush_seq + 1;
    next.root_page = root;
    next.page_count = next_page_;
    next.entry_count = header_.entry_count + entries.size();
    next.garbage_pages = garbage_;
    next.height = height;
    for (const auto& e : entries) {
      next.topic_limit = std::max(next.topic_limit, e.key.topic_id + 1);
    }
    if (!next.watermark || *next.watermark < entries.back().key) {
      next.watermark = entries.back().key;
    }
    publish(next);
  } catch (...) {
    dirty_.clear();
    next_page_ = header_.page_count;
    garbage_ = header_.garbage_pages;
    throw;
  }
  dirty_.clear();
  header_ = next;
  return header_.watermark;
}

std::optional<IndexKey> TimeIndexWriter::flush(IndexCache& cache) {
  auto entries = cache.take();
  if (entries.empty()) {
    return header_.watermark;
  }
  try {
    return flush(entries);
  } catch (...) {
    cache.restore(std::move(entries));
    throw;
  }
}

// ---------------------------------------------------------------- reader

struct TimeIndexReader::Mapping {
  void* addr = nullptr;
  size_t len = 0;
  ~Mapping() {
    if (addr != nullptr) {
      ::munmap(addr, len);
    }
  }
};

// Root-to-leaf path with a position at each level.
class TimeIndexReader::Cursor {
 public:
  explicit Cursor(const TimeIndexReader& reader) : reader_(reader) {}

  bool valid() const { return valid_; }
  IndexEntry current() const {
    const auto& leaf = path_.back();
    return {leaf.node.keys[leaf.idx], leaf.node.values[leaf.idx]};
  }

  void seek_ge(uint64_t root, const IndexKey& key) {
    path_.clear();
    valid_ = root != 0;
    if (!valid_) {
      return;
    }
    uint64_t page = root;
    while (true) {
      Node node = reader_.read_node(page);
      if (node.leaf) {
        const auto idx = static_cast<size_t>(
            std::lower_bound(node.keys.begin(), node.keys.end(), key) - node.keys.begin());
        const bool past_end = idx == node.keys.size();
        path_.push_back({std::move(node), past_end ? idx - 1 : idx});
        if (past_end) {
          next();
        }
        return;
      }
      const size_t idx = child_for(node, key);
      page = node.values[idx];
      path_.push_back({std::move(node), idx});
    }
  }

  void seek_le(uint64_t root, const IndexKey& key) {
    path_.clear();
    valid_ = root != 0;
    if (!valid_) {
      return;
    }
    uint64_t page = root;
    while (true) {
      Node node = reader_.read_node(page);
      if (node.leaf) {
        const auto ub = static_cast<size_t>(
            std::upper_bound(node.keys.begin(), node.keys.end(), key) - node.keys.begin());
        path_.push_back({std::move(node), ub == 0 ? 0 : ub - 1});
        if (ub == 0) {
          prev();
        }
        return;
      }
      const size_t idx = child_for(node, key);
      page = node.values[idx];
      path_.push_back({std::move(node), idx});
    }
  }

  bool next() {
    auto& leaf = path_.back();
    if (leaf.idx + 1 < leaf.node.keys.size()) {
      ++leaf.idx;
      return true;
    }
    path_.pop_back();
    while (!path_.empty()) {
      auto& level = path_.back();
      if (level.idx + 1 < level.node.values.size()) {
        ++level.idx;
        descend(level.node.values[level.idx], /*leftmost=*/true);
        return true;
      }
      path_.pop_back();
    }
    valid_ = false;
    return false;
  }

  bool prev() {
    auto& leaf = path_.back();
    if (leaf.idx > 0) {
      --leaf.idx;
      return true;
    }
    path_.pop_back();
    while (!path_.empty()) {
      auto& level = path_.back();
      if (level.idx > 0) {
        --level.idx;
        descend(level.node.values[level.idx], /*leftmost=*/false);
        return true;
      }
      path_.pop_back();
    }
    valid_ = false;
    return false;
  }

 private:
  struct Level {
    Node node;
    size_t idx;
  };

  static size_t child_for(const Node& node, const IndexKey& key) {
    const auto it = std::upper_bound(node.keys.begin(), node.keys.end(), key);
    return it == node.keys.begin() ? 0 : static_cast<size_t>(it - node.keys.begin()) - 1;
  }

  void descend(uint64_t page, bool leftmost) {
    while (true) {
      Node node = reader_.read_node(page);
      const size_t idx = leftmost ? 0 : node.keys.size() - 1;
      const bool leaf = node.leaf;
      if (!leaf) {
        page = node.values[idx];
      }
      path_.push_back({std::move(node), idx});
      if (leaf) {
        return;
      }
    }
  }

  const TimeIndexReader& reader_;
  std::vector<Level> path_;
  bool valid_ = false;
};

TimeIndexReader::TimeIndexReader(const std::filesystem::path& path, Access access)
    : file_(path, File::Mode::kRead), access_(access) {}

TimeIndexReader::~TimeIndexReader() = default;

IndexHeader TimeIndexReader::snapshot() const {
  Bytes page(kIndexPageSize);
  // A concurrent header write can tear one slot; the other slot still holds
  // the previous publication, so a retry only matters for pathological races.
  for (int attempt = 0;; ++attempt) {
    file_.pread_exact(page, 0);
    try {
      return decode_index_header_page(page);
    } catch (const Error&) {
      if (attempt >= 3) {
        throw;
      }
    }
  }
}

std::shared_ptr<const TimeIndexReader::Mapping> TimeIndexReader::mapping_for(uint64_t page) const {
  const size_t need = (page + 1) * kIndexPageSize;
  {
    std::shared_lock lock(map_mu_);
    if (mapping_ && mapping_->len >= need) {
      return mapping_;
    }
  }
  std::unique_lock lock(map_mu_);
  if (mapping_ && mapping_->len >= need) {
    return mapping_;
  }
  const uint64_t size = file_.size() / kIndexPageSize * kIndexPageSize;
  if (size < need) {
    corrupt_page(page, "page beyond end of file");
  }
  void* addr = ::mmap(nullptr, size, PROT_READ, MAP_SHARED, file_.fd(), 0);
  if (addr == MAP_FAILED) {
    throw_errno("mmap " + file_.path().string());
  }
  auto m = std::make_shared<Mapping>();
  m->addr = addr;
  m->len = size;
  mapping_ = m;
  return mapping_;
}

TimeIndexReader::Node TimeIndexReader::read_node(uint64_t page) const {
  if (page == 0) {
    corrupt_page(page, "node reference to header page");
  }
  if (access_ == Access::kMmap) {
    const auto m = mapping_for(page);
    return decode_node(static_cast<const uint8_t*>(m->addr) + page * kIndexPageSize, page);
  }
  uint8_t buf[kIndexPageSize];
  if (file_.pread_some(buf, page * kIndexPageSize) != kIndexPageSize) {
    corrupt_page(page, "page beyond end of file");
  }
  return decode_node(buf, page);
}

std::optional<IndexEntry> TimeIndexReader::first_at_or_after(const IndexHeader& snap, uint32_t topic_id,
                                                             uint64_t start_time, uint64_t end_time) const {
  Cursor c(*this);
  for (c.seek_ge(snap.root_page, {start_time, 0, 0}); c.valid(); c.next()) {
    const IndexEntry e = c.current();
    if (e.key.timestamp > end_time) {
      break;
    }
    if (e.key.topic_id == topic_id) {
      return e;
    }
  }
  return std::nullopt;
}

std::optional<IndexEntry> TimeIndexReader::last_at_or_before(const IndexHeader& snap, uint32_t topic_id,
                                                             uint64_t end_time, uint64_t start_time) const {
  constexpr auto kMax = std::numeric_limits<uint32_t>::max();
  Cursor c(*this);
  for (c.seek_le(snap.root_page, {end_time, kMax, kMax}); c.valid(); c.prev()) {
    const IndexEntry e = c.current();
    if (e.key.timestamp < start_time) {
      break;
    }
    if (e.key.topic_id == topic_id) {
      return e;
    }
  }
  return std::nullopt;
}

void TimeIndexReader::scan(const IndexHeader& snap, IndexKey lo, IndexKey hi,
                           const std::function<bool(const IndexEntry&)>& visit) const {
  Cursor c(*this);
  for (c.seek_ge(snap.root_page, lo); c.valid(); c.next()) {
    const IndexEntry e = c.current();
    if (hi < e.key || !visit(e)) {
      return;
    }
  }
}

std::vector<IndexEntry> TimeIndexReader::entries(const IndexHeader& snap) const {
  constexpr auto kMax = std::numeric_limits<uint32_t>::max();
  std::vector<IndexEntry> out;
  out.reserve(snap.entry_count);
  scan(snap, {}, {std::numeric_limits<uint64_t>::max(), kMax, kMax}, [&](const IndexEntry& e) {
    out.push_back(e);
    return true;
  });
  return out;
}

std::map<uint32_t, OffsetRange> TimeIndexReader::search_range(const IndexHeader& snap, uint64_t start_time,
                                                              uint64_t end_time,
                                                              std::span<const uint32_t> topic_ids,
                                                              const EndResolver& resolve_end) const {
  if (start_time > end_time) {
    throw Error(ErrorCode::kInvalidRange, "start time after end time");
  }
  std::map<uint32_t, OffsetRange> out;
  for (const uint32_t topic : topic_ids) {
    if (topic >= snap.topic_limit) {
      throw Error(ErrorCode::kUnknownTopic, "topic id " + std::to_string(topic) + " not in time index");
    }
    OffsetRange range;
    if (auto first = first_at_or_after(snap, topic, start_time, end_time)) {
      const auto last = last_at_or_before(snap, topic, end_time, start_time);
      if (!last) {
        throw Error(ErrorCode::kCorruptIndex, "range lookup found a first entry but no last entry");
      }
      range.start = first->offset;
      range.end = resolve_end(topic, last->offset);
    }
    out[topic] = range;
  }
  return out;
}

std::map<uint32_t, OffsetRange> TimeIndexReader::search_range(uint64_t start_time, uint64_t end_time,
                                                              std::span<const uint32_t> topic_ids,
                                                              const EndResolver& resolve_end) const {
  return search_range(snapshot(), start_time, end_time, topic_ids, resolve_end);
}

std::map<uint32_t, OffsetRange> TimeIndexReader::search_latest(std::span<const uint32_t> topic_ids,
                                                               uint64_t time_len_ns,
                                                               const EndResolver& resolve_end) const {
  if (time_len_ns == 0) {
    throw Error(ErrorCode::kBadParam, "time_len must be positive");
  }
  const IndexHeader snap = snapshot();
  if (!snap.watermark) {
    throw Error(ErrorCode::kEmptyIndex, "time index is empty");
  }
  const uint64_t end = snap.watermark->timestamp;
  const uint64_t start = end >= time_len_ns ? end - time_len_ns + 1 : 0;
  return search_range(snap, start, end, topic_ids, resolve_end);
}

// ---------------------------------------------------------------- recovery

namespace {

struct Validator {
  const File& file;
  const IndexHeader& header;
  IndexCheckReport& report;
  std::unordered_set<uint64_t> seen;
  std::optional<IndexKey> last;
  uint64_t entries = 0;

  // Returns the smallest key of the subtree.
  IndexKey visit(uint64_t page, uint32_t depth, bool is_root) {
    if (page == 0 || page >= header.page_count) {
      corrupt_page(page, "child reference outside published pages");
    }
    if (!seen.insert(page).second) {
      corrupt_page(page, "page referenced twice");
    }
    uint8_t buf[kIndexPageSize];
    file.pread_exact(buf, page * kIndexPageSize);
    const detail::IndexNode node = decode_node(buf, page);
    for (size_t i = 1; i < node.keys.size(); ++i) {
      if (!(node.keys[i - 1] < node.keys[i])) {
        corrupt_page(page, "keys out of order");
      }
    }
    if (node.leaf) {
      if (depth != header.height) {
        corrupt_page(page, "leaf at wrong depth");
      }
      ++report.leaf_pages;
      for (const auto& k : node.keys) {
        if (last && !(*last < k)) {
          corrupt_page(page, "in-order traversal not strictly increasing");
        }
        if (k.topic_id >= header.topic_limit) {
          corrupt_page(page, "topic id beyond topic_limit");
        }
        last = k;
        ++entries;
      }
      return node.keys.front();
    }
    ++report.internal_pages;
    const size_t min_children = is_root ? 2 : (kIndexFanout + 1) / 2;
    if (node.keys.size() < min_children) {
      corrupt_page(page, "internal node under-occupied");
    }
    IndexKey smallest{};
    for (size_t i = 0; i < node.values.size(); ++i) {
      const auto before = last;
      const IndexKey child_min = visit(node.values[i], depth + 1, false);
      if (i == 0) {
        smallest = child_min;
        if (child_min < node.keys[0]) {
          corrupt_page(page, "leftmost child below node lower bound");
        }
      } else if (child_min < node.keys[i] || (before && !(*before < node.keys[i]))) {
        corrupt_page(page, "separator does not bound its children");
      }
    }
    return std::min(smallest, node.keys.front());
  }
};

}  // namespace

IndexCheckReport recover_index(const std::filesystem::path& path, bool repair) {
  File file(path, repair ? File::Mode::kReadWrite : File::Mode::kRead);
  Bytes page(kIndexPageSize);
  if (file.pread_some(page, 0) != kIndexPageSize) {
    corrupt_page(0, "missing header page");
  }
  IndexCheckReport report;
  report.header = decode_index_header_page(page);
  const IndexHeader& h = report.header;

  const uint64_t expected = h.page_count * kIndexPageSize;
  const uint64_t size = file.size();
  if (size < expected) {
    corrupt_page(h.page_count - 1, "file shorter than published page count");
  }
  if (size > expected && repair) {
    file.truncate(expected);
    file.datasync();
    report.truncated_bytes = size - expected;
  }

  if (h.root_page == 0) {
    if (h.entry_count != 0 || h.height != 0 || h.watermark) {
      corrupt_page(0, "empty tree with non-empty header fields");
    }
    return report;
  }
  Validator v{file, h, report, {}, std::nullopt, 0};
  v.visit(h.root_page, 1, true);
  if (v.entries != h.entry_count) {
    corrupt_page(0, "entry count mismatch: header " + std::to_string(h.entry_count) + ", tree " +
                        std::to_string(v.entries));
  }
  if (!h.watermark || !v.last || *v.last != *h.watermark) {
    corrupt_page(0, "watermark is not the largest key");
  }
  return report;
}

}  // namespace brickstore
