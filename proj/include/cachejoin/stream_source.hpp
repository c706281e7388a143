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

// Skewed stream generation and the stream buffer in front of the join.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "cachejoin/records.hpp"

namespace cachejoin {

class MasterStore;

// r^-exponent / sum_{k=1..n} k^-exponent. Throws kDomain when rank is
// outside [1, n_keys].
double zipf_probability(std::uint64_t rank, double exponent, std::uint64_t n_keys);

// The keys a stream may reference. Dense key spaces (1..count) are stored
// implicitly.
class KeySpace {
 public:
  static KeySpace dense(std::uint64_t count);
  static KeySpace explicit_keys(std::vector<JoinKey> sorted_keys);
  static KeySpace of(const MasterStore& store);

  std::uint64_t size() const noexcept { return size_; }
  JoinKey at(std::uint64_t ordinal) const noexcept {
    return keys_.empty() ? static_cast<JoinKey>(ordinal + 1) : keys_[ordinal];
  }
  JoinKey max_key() const noexcept { return size_ == 0 ? 0 : at(size_ - 1); }
  bool contains(JoinKey key) const noexcept;

 private:
  std::uint64_t size_ = 0;
  std::vector<JoinKey> keys_;
};

enum class RankToKey {
  // Rank r maps to the r-th smallest master key.
  kIdentity,
  // Seeded random permutation of ranks onto keys.
  kShuffled,
};

struct ZipfSpec {
  double exponent = 1.0;
  std::uint64_t seed = 42;
  RankToKey rank_to_key = RankToKey::kIdentity;
  // Fraction of records given a key absent from the master relation.
  double orphan_rate = 0.0;
};

// Draws i.i.d. ranks from a Zipf distribution by binary search on the
// cumulative table. Payload = 8-byte big-endian sequence number followed
// by 8 random bytes, so every generated record is distinct.
class ZipfGenerator {
 public:
  ZipfGenerator(const ZipfSpec& spec, KeySpace keys);

  StreamRecord next();
  std::vector<StreamRecord> next_batch(std::size_t n);
  void fill(std::span<StreamRecord> out);

  // 1-based rank of a draw; exposed for statistical tests.
  std::uint64_t next_rank();
  JoinKey key_for_rank(std::uint64_t rank) const noexcept;
  const KeySpace& key_space() const noexcept { return keys_; }
  const ZipfSpec& spec() const noexcept { return spec_; }

 private:
  ZipfSpec spec_;
  KeySpace keys_;
  std::vector<double> cdf_;  // unnormalized prefix sums
  std::vector<std::uint32_t> permutation_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::uint64_t sequence_ = 0;
};

// Where the stream buffer gets records from.
class StreamSource {
 public:
  virtual ~StreamSource() = default;
  // Fills up to out.size() records; returns 0 once exhausted.
  virtual std::size_t read(std::span<StreamRecord> out) = 0;
};

class GeneratorSource final : public StreamSource {
 public:
  explicit GeneratorSource(ZipfGenerator gen) : gen_(std::move(gen)) {}
  std::size_t read(std::span<StreamRecord> out) override;

 private:
  ZipfGenerator gen_;
};

// Serves a pre-recorded stream, once or cyclically.
class ReplaySource final : public StreamSource {
 public:
  explicit ReplaySource(std::shared_ptr<const std::vector<StreamRecord>> records,
                        bool cyclic = false)
      : records_(std::move(records)), cyclic_(cyclic) {}
  std::size_t read(std::span<StreamRecord> out) override;

 private:
  std::shared_ptr<const std::vector<StreamRecord>> records_;
  bool cyclic_;
  std::size_t pos_ = 0;
};

inline constexpr std::size_t kDefaultStreamBufferBytes = 52428;  // 0.05 MB

enum class StreamBufferMode {
  // take() refills from the source on demand; the stream is never the
  // bottleneck.
  kSaturation,
  // Records arrive only through feed(); overflow is rejected and counted.
  kRateLimited,
};

// Bounded FIFO in front of the stream-probing phase.
class StreamBuffer {
 public:
  StreamBuffer(std::size_t capacity_bytes, StreamBufferMode mode,
               StreamSource* source = nullptr);

  std::size_t capacity_records() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return pending_.size(); }
  std::uint64_t overflow_count() const noexcept { return overflows_; }
  bool exhausted() const noexcept { return exhausted_ && pending_.empty(); }

  // False when the buffer is full (the record is dropped and counted).
  bool feed(const StreamRecord& rec);
  // Appends up to k records to out in FIFO order; returns how many.
  std::size_t take(std::size_t k, std::vector<StreamRecord>& out);
  std::vector<StreamRecord> take(std::size_t k);

 private:
  void refill();

  std::size_t capacity_;
  StreamBufferMode mode_;
  StreamSource* source_;
  std::deque<StreamRecord> pending_;
  std::vector<StreamRecord> scratch_;
  std::uint64_t overflows_ = 0;
  bool exhausted_ = false;
};

// Stream replay files: a bare sequence of 20-byte records.
void write_stream_file(const std::filesystem::path& path, std::span<const StreamRecord> records);
std::vector<StreamRecord> read_stream_file(const std::filesystem::path& path);

}  // namespace cachejoin
