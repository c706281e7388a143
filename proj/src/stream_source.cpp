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

#include "cachejoin/stream_source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "cachejoin/error.hpp"
#include "cachejoin/master_store.hpp"

namespace cachejoin {

double zipf_probability(std::uint64_t rank, double exponent, std::uint64_t n_keys) {
  if (n_keys == 0 || rank < 1 || rank > n_keys) {
    fail(ErrorCode::kDomain, "zipf rank " + std::to_string(rank) + " outside [1, " +
                                 std::to_string(n_keys) + "]");
  }
  if (exponent < 0.0 || !std::isfinite(exponent)) {
    fail(ErrorCode::kDomain, "zipf exponent must be finite and >= 0");
  }
  double h = 0.0;
  for (std::uint64_t k = 1; k <= n_keys; ++k) {
    h += std::pow(static_cast<double>(k), -exponent);
  }
  return std::pow(static_cast<double>(rank), -exponent) / h;
}

KeySpace KeySpace::dense(std::uint64_t count) {
  KeySpace ks;
  ks.size_ = count;
  return ks;
}

KeySpace KeySpace::explicit_keys(std::vector<JoinKey> sorted_keys) {
  KeySpace ks;
  ks.size_ = sorted_keys.size();
  ks.keys_ = std::move(sorted_keys);
  return ks;
}

KeySpace KeySpace::of(const MasterStore& store) {
  if (store.dense_keys()) return dense(store.record_count());
  return explicit_keys(store.all_keys());
}

bool KeySpace::contains(JoinKey key) const noexcept {
  if (keys_.empty()) return key >= 1 && key <= size_;
  return std::binary_search(keys_.begin(), keys_.end(), key);
}

ZipfGenerator::ZipfGenerator(const ZipfSpec& spec, KeySpace keys)
    : spec_(spec), keys_(std::move(keys)), rng_(spec.seed) {
  if (keys_.size() == 0) {
    fail(ErrorCode::kEmptyRelation, "cannot generate a stream over an empty key space");
  }
  if (spec.exponent < 0.0 || !std::isfinite(spec.exponent)) {
    fail(ErrorCode::kDomain, "zipf exponent must be finite and >= 0");
  }
  if (spec.orphan_rate < 0.0 || spec.orphan_rate > 1.0) {
    fail(ErrorCode::kDomain, "orphan rate must lie in [0, 1]");
  }
  if (keys_.size() > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorCode::kCapacity, "key space too large");
  }
  cdf_.resize(keys_.size());
  double sum = 0.0;
  for (std::uint64_t r = 1; r <= keys_.size(); ++r) {
    sum += std::pow(static_cast<double>(r), -spec.exponent);
    cdf_[r - 1] = sum;
  }
  if (spec.rank_to_key == RankToKey::kShuffled) {
    permutation_.resize(keys_.size());
    for (std::uint32_t i = 0; i < permutation_.size(); ++i) permutation_[i] = i;
    std::mt19937_64 perm_rng(spec.seed ^ 0x5bd1e9955bd1e995ULL);
    std::shuffle(permutation_.begin(), permutation_.end(), perm_rng);
  }
}

std::uint64_t ZipfGenerator::next_rank() {
  const double u = unit_(rng_) * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
}

JoinKey ZipfGenerator::key_for_rank(std::uint64_t rank) const noexcept {
  const std::uint64_t ordinal = permutation_.empty() ? rank - 1 : permutation_[rank - 1];
  return keys_.at(ordinal);
}

StreamRecord ZipfGenerator::next() {
  StreamRecord rec;
  const bool orphan = spec_.orphan_rate > 0.0 && unit_(rng_) < spec_.orphan_rate;
  if (orphan) {
    // Keys above the largest master key are never in the relation.
    const JoinKey top = keys_.max_key();
    const std::uint64_t span = std::numeric_limits<JoinKey>::max() - std::uint64_t{top};
    rec.fkey = static_cast<JoinKey>(top + 1 + (rng_() % std::min<std::uint64_t>(span, 1024)));
  } else {
    rec.fkey = key_for_rank(next_rank());
  }
  store_be64(rec.payload.data(), sequence_++);
  store_be64(rec.payload.data() + 8, rng_());
  return rec;
}

std::vector<StreamRecord> ZipfGenerator::next_batch(std::size_t n) {
  std::vector<StreamRecord> out(n);
  fill(out);
  return out;
}

void ZipfGenerator::fill(std::span<StreamRecord> out) {
  for (auto& r : out) r = next();
}

std::size_t GeneratorSource::read(std::span<StreamRecord> out) {
  gen_.fill(out);
  return out.size();
}

std::size_t ReplaySource::read(std::span<StreamRecord> out) {
  const auto& recs = *records_;
  if (recs.empty()) return 0;
  std::size_t n = 0;
  while (n < out.size()) {
    if (pos_ == recs.size()) {
      if (!cyclic_) break;
      pos_ = 0;
    }
    const std::size_t chunk = std::min(out.size() - n, recs.size() - pos_);
    std::copy_n(recs.begin() + static_cast<std::ptrdiff_t>(pos_), chunk, out.begin() + n);
    pos_ += chunk;
    n += chunk;
  }
  return n;
}

StreamBuffer::StreamBuffer(std::size_t capacity_bytes, StreamBufferMode mode,
                           StreamSource* source)
    : capacity_(capacity_bytes / kStreamRecordSize), mode_(mode), source_(source) {
  if (capacity_ == 0) fail(ErrorCode::kInvalidArgument, "stream buffer holds no records");
  if (mode == StreamBufferMode::kSaturation && source == nullptr) {
    fail(ErrorCode::kInvalidArgument, "saturation mode needs a stream source");
  }
  scratch_.resize(capacity_);
}

bool StreamBuffer::feed(const StreamRecord& rec) {
  if (pending_.size() >= capacity_) {
    ++overflows_;
    return false;
  }
  pending_.push_back(rec);
  return true;
}

void StreamBuffer::refill() {
  if (exhausted_ || source_ == nullptr) return;
  const std::size_t room = capacity_ - pending_.size();
  if (room == 0) return;
  const std::size_t got = source_->read(std::span(scratch_.data(), room));
  if (got == 0) exhausted_ = true;
  pending_.insert(pending_.end(), scratch_.begin(),
                  scratch_.begin() + static_cast<std::ptrdiff_t>(got));
}

std::size_t StreamBuffer::take(std::size_t k, std::vector<StreamRecord>& out) {
  std::size_t taken = 0;
  while (taken < k) {
    if (pending_.empty()) {
      if (mode_ != StreamBufferMode::kSaturation) break;
      refill();
      if (pending_.empty()) break;
    }
    const std::size_t n = std::min(k - taken, pending_.size());
    out.insert(out.end(), pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    taken += n;
  }
  return taken;
}

std::vector<StreamRecord> StreamBuffer::take(std::size_t k) {
  std::vector<StreamRecord> out;
  take(k, out);
  return out;
}

void write_stream_file(const std::filesystem::path& path, std::span<const StreamRecord> records) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kStorage, "cannot create stream file '" + path.string() + "'");
  std::array<std::uint8_t, kStreamRecordSize> buf;
  for (const auto& r : records) {
    r.serialize(buf);
    f.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  }
  f.flush();
  if (!f) fail(ErrorCode::kStorage, "write failed for stream file '" + path.string() + "'");
}

std::vector<StreamRecord> read_stream_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kStorage, "cannot open stream file '" + path.string() + "'");
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (raw.size() % kStreamRecordSize != 0) {
    fail(ErrorCode::kCorruption, "stream file '" + path.string() + "' has " +
                                     std::to_string(raw.size()) +
                                     " bytes, not a multiple of 20");
  }
  std::vector<StreamRecord> out;
  out.reserve(raw.size() / kStreamRecordSize);
  for (std::size_t off = 0; off < raw.size(); off += kStreamRecordSize) {
    out.push_back(StreamRecord::deserialize(raw.data() + off));
  }
  return out;
}

}  // namespace cachejoin
