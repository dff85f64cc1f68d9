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

#include "brickstore/io.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <utility>

#include "brickstore/error.hpp"

namespace brickstore {

File::File(const std::filesystem::path& path, Mode mode) : path_(path) {
  int flags = O_CLOEXEC;
  switch (mode) {
    case Mode::kRead: flags |= O_RDONLY; break;
    case Mode::kReadWrite: flags |= O_RDWR; break;
    case Mode::kCreateNew: flags |= O_RDWR | O_CREAT | O_EXCL; break;
    case Mode::kAppend: flags |= O_RDWR | O_CREAT; break;
    case Mode::kCreateTruncate: flags |= O_RDWR | O_CREAT | O_TRUNC; break;
  }
  fd_ = ::open(path.c_str(), flags, 0644);
  if (fd_ < 0) {
    if (errno == EEXIST) {
      throw Error(ErrorCode::kAlreadyExists, "file exists: " + path.string());
    }
    throw_errno("open " + path.string());
  }
}

File::~File() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

File::File(File&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), path_(std::move(other.path_)) {}

File& File::operator=(File&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) {
      ::close(fd_);
    }
    fd_ = std::exchange(other.fd_, -1);
    path_ = std::move(other.path_);
  }
  return *this;
}

uint64_t File::size() const {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) {
    throw_errno("fstat " + path_.string());
  }
  return static_cast<uint64_t>(st.st_size);
}

size_t File::pread_some(std::span<uint8_t> dst, uint64_t offset) const {
  size_t done = 0;
  while (done < dst.size()) {
    const ssize_t n = ::pread(fd_, dst.data() + done, dst.size() - done,
                              static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("pread " + path_.string());
    }
    if (n == 0) {
      break;
    }
    done += static_cast<size_t>(n);
  }
  return done;
}

void File::pread_exact(std::span<uint8_t> dst, uint64_t offset) const {
  if (pread_some(dst, offset) != dst.size()) {
    throw Error(ErrorCode::kOutOfBounds,
                "short read of " + path_.string() + " at offset " + std::to_string(offset), offset);
  }
}

void File::pwrite_all(ByteView src, uint64_t offset) {
  size_t done = 0;
  while (done < src.size()) {
    const ssize_t n = ::pwrite(fd_, src.data() + done, src.size() - done,
                               static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("pwrite " + path_.string());
    }
    done += static_cast<size_t>(n);
  }
}

void File::pwritev_all(std::span<const ByteView> parts, uint64_t offset) {
  std::vector<iovec> iov;
  iov.reserve(parts.size());
  size_t total = 0;
  for (const auto& p : parts) {
    if (!p.empty()) {
      iov.push_back({const_cast<uint8_t*>(p.data()), p.size()});
      total += p.size();
    }
  }
  size_t done = 0;
  size_t first = 0;
  while (done < total) {
    const ssize_t n = ::pwritev(fd_, iov.data() + first, static_cast<int>(iov.size() - first),
                                static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw_errno("pwritev " + path_.string());
    }
    done += static_cast<size_t>(n);
    // Advance past fully written buffers after a partial write.
    auto left = static_cast<size_t>(n);
    while (first < iov.size() && left >= iov[first].iov_len) {
      left -= iov[first].iov_len;
      ++first;
    }
    if (first < iov.size() && left > 0) {
      iov[first].iov_base = static_cast<uint8_t*>(iov[first].iov_base) + left;
      iov[first].iov_len -= left;
    }
  }
}

void File::truncate(uint64_t size) {
  if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) {
    throw_errno("ftruncate " + path_.string());
  }
}

void File::datasync() {
  if (::fdatasync(fd_) != 0) {
    throw_errno("fdatasync " + path_.string());
  }
}

void File::sync_range(uint64_t offset, uint64_t len) {
#ifdef __linux__
  const unsigned flags =
      SYNC_FILE_RANGE_WAIT_BEFORE | SYNC_FILE_RANGE_WRITE | SYNC_FILE_RANGE_WAIT_AFTER;
  if (::sync_file_range(fd_, static_cast<off_t>(offset), static_cast<off_t>(len), flags) == 0) {
    return;
  }
  if (errno != ENOSYS && errno != EINVAL && errno != ESPIPE) {
    throw_errno("sync_file_range " + path_.string());
  }
#else
  (void)offset;
  (void)len;
#endif
  datasync();
}

void File::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void fsync_directory(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) {
    throw_errno("open dir " + dir.string());
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) {
    throw_errno("fsync dir " + dir.string());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  File out(tmp, File::Mode::kCreateTruncate);
  out.pwrite_all({reinterpret_cast<const uint8_t*>(content.data()), content.size()}, 0);
  out.datasync();
  out.close();
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, "rename " + tmp.string() + ": " + ec.message());
  }
  fsync_directory(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string read_file(const std::filesystem::path& path) {
  File in(path, File::Mode::kRead);
  std::string out(in.size(), '\0');
  const auto n = in.pread_some({reinterpret_cast<uint8_t*>(out.data()), out.size()}, 0);
  out.resize(n);
  return out;
}

}  // namespace brickstore
