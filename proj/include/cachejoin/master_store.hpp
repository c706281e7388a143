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

// Disk-resident master relation: a sorted file of fixed-width records with a
// sparse key index stored after the body.
//
// Layout (all integers big-endian):
//
//   offset 0   "CJMASTER"              8 bytes
//   offset 8   format version (1)      u32
//   offset 12  record width (120)      u32
//   offset 16  key width (4)           u32
//   offset 20  index stride (64)       u32
//   offset 24  record count            u64
//   offset 32  body: record count x 120 bytes, keys strictly increasing
//   trailer:   ceil(count / 64) x { key u32, ordinal u64 }
//
// The trailer holds the key of every 64th record (ordinals 0, 64, 128, ...).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cachejoin/records.hpp"

namespace cachejoin {

inline constexpr char kMasterMagic[8] = {'C', 'J', 'M', 'A', 'S', 'T', 'E', 'R'};
inline constexpr std::uint32_t kMasterFormatVersion = 1;
inline constexpr std::size_t kMasterHeaderSize = 32;
inline constexpr std::size_t kSparseIndexStride = 64;
inline constexpr std::size_t kSparseIndexEntrySize = 12;

enum class ReadMode {
  kBuffered,
  // O_DIRECT: every partition load goes to the device. Falls back to
  // buffered reads on filesystems that reject O_DIRECT.
  kDirect,
};

struct MasterFileSummary {
  std::string path;
  std::uint64_t record_count = 0;
  std::uint64_t byte_size = 0;
  std::uint64_t checksum = 0;  // FNV-1a 64 over the whole file
};

struct GenerateOptions {
  std::uint64_t max_bytes = std::uint64_t{64} << 30;
};

struct SparseIndexEntry {
  JoinKey key;
  std::uint64_t ordinal;
};

// Deterministic payload for a generated master record.
void fill_master_payload(std::uint64_t seed, JoinKey key,
                         std::span<std::uint8_t, kMasterPayloadSize> out) noexcept;

std::uint64_t master_file_size(std::uint64_t record_count) noexcept;

// Writes `count` records with keys 1..count. Same (count, seed) gives the
// same bytes.
MasterFileSummary generate_master(const std::filesystem::path& path,
                                  std::uint64_t count, std::uint64_t seed,
                                  const GenerateOptions& options = {});

// Writes arbitrary records; keys must be strictly increasing.
MasterFileSummary write_master(const std::filesystem::path& path,
                               std::span<const MasterRecord> records,
                               const GenerateOptions& options = {});

class AlignedBuffer {
 public:
  static constexpr std::size_t kAlignment = 4096;

  AlignedBuffer() = default;
  void reserve(std::size_t bytes);
  std::uint8_t* data() noexcept { return data_.get(); }
  const std::uint8_t* data() const noexcept { return data_.get(); }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  struct Free {
    void operator()(std::uint8_t* p) const noexcept;
  };
  std::unique_ptr<std::uint8_t, Free> data_;
  std::size_t capacity_ = 0;
};

// A cyclic window of consecutive master records. Owns its read buffer so a
// disk buffer can reload it without reallocating.
class Partition {
 public:
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  std::uint64_t start_ordinal() const noexcept { return start_ordinal_; }
  bool wrapped() const noexcept { return wrapped_; }

  const std::uint8_t* record_bytes(std::size_t i) const noexcept {
    const Segment& s = i < segments_[0].count ? segments_[0] : segments_[1];
    const std::size_t local = i < segments_[0].count ? i : i - segments_[0].count;
    return buffer_.data() + s.offset + local * kMasterRecordSize;
  }
  JoinKey key(std::size_t i) const noexcept { return load_be32(record_bytes(i)); }
  const std::uint8_t* payload(std::size_t i) const noexcept {
    return record_bytes(i) + kKeyWidth;
  }
  MasterRecord record(std::size_t i) const noexcept {
    return MasterRecord::deserialize(record_bytes(i));
  }

 private:
  friend class MasterStore;
  struct Segment {
    std::size_t offset = 0;  // byte offset into buffer_
    std::size_t count = 0;
  };
  AlignedBuffer buffer_;
  Segment segments_[2];
  std::size_t size_ = 0;
  std::uint64_t start_ordinal_ = 0;
  bool wrapped_ = false;
};

// Read-only handle on a master file. All const members are safe to call
// from several threads at once.
class MasterStore {
 public:
  static MasterStore open(const std::filesystem::path& path,
                          ReadMode mode = ReadMode::kBuffered);

  MasterStore(MasterStore&& other) noexcept;
  MasterStore& operator=(MasterStore&& other) noexcept;
  MasterStore(const MasterStore&) = delete;
  MasterStore& operator=(const MasterStore&) = delete;
  ~MasterStore();

  const std::filesystem::path& path() const noexcept { return path_; }
  std::uint64_t record_count() const noexcept { return record_count_; }
  ReadMode read_mode() const noexcept { return mode_; }
  JoinKey min_key() const noexcept { return min_key_; }
  JoinKey max_key() const noexcept { return max_key_; }
  // True when the keys are exactly 1..record_count.
  bool dense_keys() const noexcept { return dense_; }
  const std::vector<SparseIndexEntry>& sparse_index() const noexcept { return index_; }

  // min(d_B, record_count) records in cyclic file order, starting at the
  // first record whose key is >= start_key (ordinal 0 if there is none).
  Partition read_partition(JoinKey start_key, std::size_t d_b) const;
  void read_partition(JoinKey start_key, std::size_t d_b, Partition& out) const;

  bool contains_key(JoinKey key) const;
  std::optional<MasterRecord> find(JoinKey key) const;

  // Sequential scans.
  std::vector<JoinKey> all_keys() const;
  std::vector<MasterRecord> read_all() const;

 private:
  MasterStore() = default;
  std::uint64_t block_for(JoinKey key) const noexcept;
  // Reads records [first, first + count) into buf at byte offset dest;
  // returns the offset of the first record inside buf.
  std::size_t read_records(std::uint64_t first, std::size_t count,
                           AlignedBuffer& buf, std::size_t dest) const;

  std::filesystem::path path_;
  int fd_ = -1;
  ReadMode mode_ = ReadMode::kBuffered;
  std::uint64_t record_count_ = 0;
  JoinKey min_key_ = 0;
  JoinKey max_key_ = 0;
  bool dense_ = false;
  std::vector<SparseIndexEntry> index_;
};

}  // namespace cachejoin
