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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brickstore {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

// Little-endian encoding helpers. The build only targets little-endian hosts,
// so these are plain memcpy.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
inline void put_le(Bytes& out, T value) {
  const auto at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
inline void store_le(uint8_t* dst, T value) {
  std::memcpy(dst, &value, sizeof(T));
}

template <typename T>
inline T load_le(const uint8_t* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  return value;
}

inline void put_bytes(Bytes& out, ByteView data) { out.insert(out.end(), data.begin(), data.end()); }

inline void put_bytes(Bytes& out, std::string_view data) {
  out.insert(out.end(), data.begin(), data.end());
}

// Owning POSIX file descriptor.
class File {
 public:
  enum class Mode { kRead, kReadWrite, kCreateNew, kAppend, kCreateTruncate };

  File() = default;
  File(const std::filesystem::path& path, Mode mode);
  ~File();

  File(File&& other) noexcept;
  File& operator=(File&& other) noexcept;
  File(const File&) = delete;
  File& operator=(const File&) = delete;

  bool is_open() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  uint64_t size() const;

  // Reads exactly dst.size() bytes or throws (kOutOfBounds on short read).
  void pread_exact(std::span<uint8_t> dst, uint64_t offset) const;
  // Reads up to dst.size() bytes; returns the count actually read.
  size_t pread_some(std::span<uint8_t> dst, uint64_t offset) const;
  void pwrite_all(ByteView src, uint64_t offset);
  // Gathers several buffers into one write at `offset`.
  void pwritev_all(std::span<const ByteView> parts, uint64_t offset);

  void truncate(uint64_t size);
  void datasync();
  // Pushes [offset, offset+len) to stable storage. Falls back to fdatasync
  // when range sync is unavailable.
  void sync_range(uint64_t offset, uint64_t len);
  void close();

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

// Write-temp-then-rename, fsyncing the file and its directory.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);
void fsync_directory(const std::filesystem::path& dir);

}  // namespace brickstore
