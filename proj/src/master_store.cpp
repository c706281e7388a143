// Copyright 2026 The CacheJoin Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cachejoin/master_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <utility>

#include "cachejoin/error.hpp"

namespace cachejoin {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t align_down(std::size_t v) noexcept {
  return v & ~(AlignedBuffer::kAlignment - 1);
}
std::size_t align_up(std::size_t v) noexcept {
  return align_down(v + AlignedBuffer::kAlignment - 1);
}

std::string errno_text(const std::string& what, const std::filesystem::path& p) {
  return what + " '" + p.string() + "': " + std::strerror(errno);
}

// Buffered writer that tracks the running checksum of everything written.
class ChecksumWriter {
 public:
  ChecksumWriter(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
    if (fd_ < 0) fail(ErrorCode::kStorage, errno_text("cannot create", path));
    buf_.reserve(kChunk);
  }
  ~ChecksumWriter() {
    if (fd_ >= 0) ::close(fd_);
  }

  void write(const std::uint8_t* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      checksum_ = (checksum_ ^ data[i]) * kFnvPrime;
    }
    buf_.insert(buf_.end(), data, data + n);
    bytes_ += n;
    if (buf_.size() >= kChunk) flush();
  }

  void finish() {
    flush();
    // Dirty pages written back now rather than during a later timed run.
    if (::fsync(fd_) != 0) fail(ErrorCode::kStorage, errno_text("fsync failed", path_));
    if (::close(fd_) != 0) {
      fd_ = -1;
      fail(ErrorCode::kStorage, errno_text("close failed", path_));
    }
    fd_ = -1;
  }

  std::uint64_t checksum() const noexcept { return checksum_; }
  std::uint64_t bytes() const noexcept { return bytes_; }

 private:
  static constexpr std::size_t kChunk = 1 << 20;

  void flush() {
    std::size_t off = 0;
    while (off < buf_.size()) {
      ssize_t w = ::write(fd_, buf_.data() + off, buf_.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kStorage, errno_text("write failed", path_));
      }
      off += static_cast<std::size_t>(w);
    }
    buf_.clear();
  }

  std::filesystem::path path_;
  int fd_ = -1;
  std::vector<std::uint8_t> buf_;
  std::uint64_t checksum_ = kFnvOffset;
  std::uint64_t bytes_ = 0;
};

void write_header(ChecksumWriter& w, std::uint64_t count) {
  std::uint8_t h[kMasterHeaderSize] = {};
  std::memcpy(h, kMasterMagic, sizeof(kMasterMagic));
  store_be32(h + 8, kMasterFormatVersion);
  store_be32(h + 12, kMasterRecordSize);
  store_be32(h + 16, kKeyWidth);
  store_be32(h + 20, kSparseIndexStride);
  store_be64(h + 24, count);
  w.write(h, sizeof(h));
}

void write_index(ChecksumWriter& w, const std::vector<JoinKey>& keys) {
  std::uint8_t e[kSparseIndexEntrySize];
  for (std::size_t i = 0; i < keys.size(); ++i) {
    store_be32(e, keys[i]);
    store_be64(e + 4, i * kSparseIndexStride);
    w.write(e, sizeof(e));
  }
}

void check_capacity(std::uint64_t count, const GenerateOptions& options) {
  if (count > std::numeric_limits<JoinKey>::max()) {
    fail(ErrorCode::kCapacity, "record count " + std::to_string(count) +
                                   " exceeds the 32-bit key space");
  }
  const std::uint64_t size = master_file_size(count);
  if (size > options.max_bytes) {
    fail(ErrorCode::kCapacity, "master file of " + std::to_string(count) +
                                   " records needs " + std::to_string(size) +
                                   " bytes, limit is " +
                                   std::to_string(options.max_bytes));
  }
}

std::uint64_t index_entries(std::uint64_t count) noexcept {
  return (count + kSparseIndexStride - 1) / kSparseIndexStride;
}

}  // namespace

void fill_master_payload(std::uint64_t seed, JoinKey key,
                         std::span<std::uint8_t, kMasterPayloadSize> out) noexcept {
  std::uint64_t state = seed ^ (std::uint64_t{key} * 0xd6e8feb86659fd93ULL);
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t v = splitmix64(state);
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(v >> (8 * b));
    }
  }
}

std::uint64_t master_file_size(std::uint64_t record_count) noexcept {
  return kMasterHeaderSize + record_count * kMasterRecordSize +
         index_entries(record_count) * kSparseIndexEntrySize;
}

MasterFileSummary generate_master(const std::filesystem::path& path,
                                  std::uint64_t count, std::uint64_t seed,
                                  const GenerateOptions& options) {
  check_capacity(count, options);
  ChecksumWriter w(path);
  write_header(w, count);
  std::vector<JoinKey> index_keys;
  index_keys.reserve(index_entries(count));
  std::uint8_t rec[kMasterRecordSize];
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto key = static_cast<JoinKey>(i + 1);
    if (i % kSparseIndexStride == 0) index_keys.push_back(key);
    store_be32(rec, key);
    fill_master_payload(seed, key,
                        std::span<std::uint8_t, kMasterPayloadSize>(rec + kKeyWidth,
                                                                    kMasterPayloadSize));
    w.write(rec, sizeof(rec));
  }
  write_index(w, index_keys);
  w.finish();
  return {path.string(), count, w.bytes(), w.checksum()};
}

MasterFileSummary write_master(const std::filesystem::path& path,
                               std::span<const MasterRecord> records,
                               const GenerateOptions& options) {
  check_capacity(records.size(), options);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].key <= records[i - 1].key) {
      fail(ErrorCode::kInvalidArgument,
           "master keys must be strictly increasing (ordinal " + std::to_string(i) + ")");
    }
  }
  ChecksumWriter w(path);
  write_header(w, records.size());
  std::vector<JoinKey> index_keys;
  std::array<std::uint8_t, kMasterRecordSize> rec;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i % kSparseIndexStride == 0) index_keys.push_back(records[i].key);
    records[i].serialize(rec);
    w.write(rec.data(), rec.size());
  }
  write_index(w, index_keys);
  w.finish();
  return {path.string(), records.size(), w.bytes(), w.checksum()};
}

void AlignedBuffer::Free::operator()(std::uint8_t* p) const noexcept { std::free(p); }

void AlignedBuffer::reserve(std::size_t bytes) {
  if (bytes <= capacity_) return;
  const std::size_t cap = align_up(bytes);
  auto* p = static_cast<std::uint8_t*>(std::aligned_alloc(kAlignment, cap));
  if (p == nullptr) throw std::bad_alloc();
  data_.reset(p);
  capacity_ = cap;
}

MasterStore MasterStore::open(const std::filesystem::path& path, ReadMode mode) {
  MasterStore s;
  s.path_ = path;
  s.mode_ = mode;
  int flags = O_RDONLY;
  if (mode == ReadMode::kDirect) flags |= O_DIRECT;
  s.fd_ = ::open(path.c_str(), flags);
  if (s.fd_ < 0 && mode == ReadMode::kDirect && errno == EINVAL) {
    s.mode_ = ReadMode::kBuffered;
    s.fd_ = ::open(path.c_str(), O_RDONLY);
  }
  if (s.fd_ < 0) fail(ErrorCode::kStorage, errno_text("cannot open", path));

  struct stat st{};
  if (::fstat(s.fd_, &st) != 0) fail(ErrorCode::kStorage, errno_text("cannot stat", path));
  const auto file_size = static_cast<std::uint64_t>(st.st_size);
  if (file_size < kMasterHeaderSize) {
    fail(ErrorCode::kFormat, "'" + path.string() + "' is too short for a master header");
  }

  // Header and trailer go through a plain descriptor; O_DIRECT would force
  // aligned reads for a few bytes.
  int plain = ::open(path.c_str(), O_RDONLY);
  if (plain < 0) fail(ErrorCode::kStorage, errno_text("cannot open", path));
  auto read_exact = [&](std::uint64_t off, std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      ssize_t r = ::pread(plain, dst + got, n - got, static_cast<off_t>(off + got));
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) {
        ::close(plain);
        fail(ErrorCode::kStorage, errno_text("read failed", path));
      }
      got += static_cast<std::size_t>(r);
    }
  };

  std::uint8_t h[kMasterHeaderSize];
  read_exact(0, h, sizeof(h));
  auto bad_format = [&](const std::string& why) {
    ::close(plain);
    fail(ErrorCode::kFormat, "'" + path.string() + "': " + why);
  };
  if (std::memcmp(h, kMasterMagic, sizeof(kMasterMagic)) != 0) bad_format("bad magic");
  if (load_be32(h + 8) != kMasterFormatVersion) {
    bad_format("unsupported format version " + std::to_string(load_be32(h + 8)));
  }
  if (load_be32(h + 12) != kMasterRecordSize) bad_format("unexpected record width");
  if (load_be32(h + 16) != kKeyWidth) bad_format("unexpected key width");
  if (load_be32(h + 20) != kSparseIndexStride) bad_format("unexpected index stride");
  s.record_count_ = load_be64(h + 24);

  if (s.record_count_ > std::numeric_limits<JoinKey>::max() ||
      master_file_size(s.record_count_) != file_size) {
    ::close(plain);
    fail(ErrorCode::kCorruption,
         "'" + path.string() + "': file size " + std::to_string(file_size) +
             " does not match header record count " + std::to_string(s.record_count_));
  }

  const std::uint64_t n_index = index_entries(s.record_count_);
  std::vector<std::uint8_t> raw(n_index * kSparseIndexEntrySize);
  if (!raw.empty()) {
    read_exact(kMasterHeaderSize + s.record_count_ * kMasterRecordSize, raw.data(),
               raw.size());
  }
  s.index_.resize(n_index);
  for (std::uint64_t i = 0; i < n_index; ++i) {
    const std::uint8_t* e = raw.data() + i * kSparseIndexEntrySize;
    s.index_[i] = {load_be32(e), load_be64(e + 4)};
    const bool ordered = i == 0 || s.index_[i].key > s.index_[i - 1].key;
    if (!ordered || s.index_[i].ordinal != i * kSparseIndexStride) {
      ::close(plain);
      fail(ErrorCode::kCorruption,
           "'" + path.string() + "': sparse index entry " + std::to_string(i) + " is invalid");
    }
  }
  if (s.record_count_ > 0) {
    std::uint8_t last[kKeyWidth];
    read_exact(kMasterHeaderSize + (s.record_count_ - 1) * kMasterRecordSize, last,
               sizeof(last));
    s.min_key_ = s.index_.front().key;
    s.max_key_ = load_be32(last);
    s.dense_ = s.min_key_ == 1 && s.max_key_ == s.record_count_;
  }
  ::close(plain);
  return s;
}

MasterStore::MasterStore(MasterStore&& other) noexcept { *this = std::move(other); }

MasterStore& MasterStore::operator=(MasterStore&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    mode_ = other.mode_;
    record_count_ = other.record_count_;
    min_key_ = other.min_key_;
    max_key_ = other.max_key_;
    dense_ = other.dense_;
    index_ = std::move(other.index_);
  }
  return *this;
}

MasterStore::~MasterStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t MasterStore::block_for(JoinKey key) const noexcept {
  auto it = std::upper_bound(index_.begin(), index_.end(), key,
                             [](JoinKey k, const SparseIndexEntry& e) { return k < e.key; });
  if (it == index_.begin()) return 0;
  return static_cast<std::uint64_t>(std::prev(it) - index_.begin());
}

std::size_t MasterStore::read_records(std::uint64_t first, std::size_t count,
                                      AlignedBuffer& buf, std::size_t dest) const {
  const std::uint64_t begin = kMasterHeaderSize + first * kMasterRecordSize;
  const std::uint64_t end = begin + count * kMasterRecordSize;
  const std::uint64_t aligned_begin = align_down(begin);
  const std::size_t length = align_up(end) - aligned_begin;
  std::uint8_t* dst = buf.data() + dest;
  std::size_t got = 0;
  const std::size_t need = end - aligned_begin;
  while (got < need) {
    ssize_t r = ::pread(fd_, dst + got, length - got,
                        static_cast<off_t>(aligned_begin + got));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) fail(ErrorCode::kStorage, errno_text("read failed", path_));
    if (r == 0) {
      fail(ErrorCode::kCorruption, "'" + path_.string() + "' ended early while reading");
    }
    got += static_cast<std::size_t>(r);
  }
  return dest + (begin - aligned_begin);
}

Partition MasterStore::read_partition(JoinKey start_key, std::size_t d_b) const {
  Partition p;
  read_partition(start_key, d_b, p);
  return p;
}

void MasterStore::read_partition(JoinKey start_key, std::size_t d_b, Partition& out) const {
  if (record_count_ == 0) {
    fail(ErrorCode::kEmptyRelation, "cannot read a partition from an empty master file");
  }
  if (d_b == 0) fail(ErrorCode::kInvalidArgument, "partition size must be at least 1");

  const std::uint64_t n = std::min<std::uint64_t>(d_b, record_count_);
  const std::size_t first_len = align_up((kSparseIndexStride + n) * kMasterRecordSize) +
                                2 * AlignedBuffer::kAlignment;
  out.buffer_.reserve(first_len + align_up(n * kMasterRecordSize) +
                      2 * AlignedBuffer::kAlignment);

  // One read covers the index block that may hold the start record plus
  // the n records after it.
  const std::uint64_t block_start = block_for(start_key) * kSparseIndexStride;
  const std::uint64_t probe_count =
      std::min<std::uint64_t>(kSparseIndexStride + n, record_count_ - block_start);
  const std::size_t base = read_records(block_start, probe_count, out.buffer_, 0);

  const std::uint64_t block_len =
      std::min<std::uint64_t>(kSparseIndexStride, record_count_ - block_start);
  std::uint64_t pos = 0;
  while (pos < block_len &&
         load_be32(out.buffer_.data() + base + pos * kMasterRecordSize) < start_key) {
    ++pos;
  }
  std::uint64_t start = block_start + pos;
  out.wrapped_ = false;
  std::size_t seg0_offset = base + pos * kMasterRecordSize;
  if (start == record_count_) {
    start = 0;
    out.wrapped_ = true;
  }
  const std::uint64_t seg0_count = std::min<std::uint64_t>(n, record_count_ - start);
  if (out.wrapped_ || start + seg0_count > block_start + probe_count) {
    seg0_offset = read_records(start, seg0_count, out.buffer_, 0);
  }
  out.segments_[0] = {seg0_offset, seg0_count};
  out.segments_[1] = {0, 0};
  if (seg0_count < n) {
    out.wrapped_ = true;
    const std::size_t dest = first_len;
    out.segments_[1] = {read_records(0, n - seg0_count, out.buffer_, dest),
                        n - seg0_count};
  }
  out.size_ = n;
  out.start_ordinal_ = start;
}

std::optional<MasterRecord> MasterStore::find(JoinKey key) const {
  if (record_count_ == 0 || key < min_key_ || key > max_key_) return std::nullopt;
  const std::uint64_t block_start = block_for(key) * kSparseIndexStride;
  const std::uint64_t len =
      std::min<std::uint64_t>(kSparseIndexStride, record_count_ - block_start);
  AlignedBuffer buf;
  buf.reserve(align_up(len * kMasterRecordSize) + 2 * AlignedBuffer::kAlignment);
  const std::size_t base = read_records(block_start, len, buf, 0);
  for (std::uint64_t i = 0; i < len; ++i) {
    const std::uint8_t* r = buf.data() + base + i * kMasterRecordSize;
    const JoinKey k = load_be32(r);
    if (k == key) return MasterRecord::deserialize(r);
    if (k > key) break;
  }
  return std::nullopt;
}

bool MasterStore::contains_key(JoinKey key) const { return find(key).has_value(); }

std::vector<MasterRecord> MasterStore::read_all() const {
  std::vector<MasterRecord> out;
  out.reserve(record_count_);
  constexpr std::size_t kChunk = 8192;
  AlignedBuffer buf;
  buf.reserve(align_up(kChunk * kMasterRecordSize) + 2 * AlignedBuffer::kAlignment);
  for (std::uint64_t first = 0; first < record_count_; first += kChunk) {
    const std::size_t len = std::min<std::uint64_t>(kChunk, record_count_ - first);
    const std::size_t base = read_records(first, len, buf, 0);
    for (std::size_t i = 0; i < len; ++i) {
      out.push_back(MasterRecord::deserialize(buf.data() + base + i * kMasterRecordSize));
    }
  }
  return out;
}

std::vector<JoinKey> MasterStore::all_keys() const {
  std::vector<JoinKey> keys;
  keys.reserve(record_count_);
  if (dense_) {
    for (std::uint64_t i = 1; i <= record_count_; ++i) keys.push_back(static_cast<JoinKey>(i));
    return keys;
  }
  for (const auto& r : read_all()) keys.push_back(r.key);
  return keys;
}

}  // namespace cachejoin
