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

#pragma once

#include <cstdint>
#include <optional>

#include "cachejoin/records.hpp"

namespace cachejoin {

inline constexpr std::uint32_t kDefaultFudge = 8;
inline constexpr std::uint64_t kDefaultDiskBufferRecords = 850;
inline constexpr std::uint64_t kDefaultCacheRecords = 8738;
inline constexpr std::uint64_t kDefaultIntermediateBytes = 2u << 20;

struct BudgetRequest {
  std::uint64_t total_bytes = 0;
  std::uint64_t d_b = kDefaultDiskBufferRecords;
  std::uint32_t n_disk_buffers = 1;
  std::uint64_t h_r = kDefaultCacheRecords;
  std::uint64_t i_b_bytes = kDefaultIntermediateBytes;
  std::optional<double> alpha;  // empty: AUTO
  std::uint32_t fudge = kDefaultFudge;
};

// Split of the total memory M across disk buffers, the frequency cache, the
// intermediate buffer, the stream hash table and its key queue. Sizes are in
// records (entries for the queue).
struct MemoryBudget {
  std::uint64_t total_bytes = 0;
  std::uint64_t d_b = 0;
  std::uint32_t n_disk_buffers = 1;
  std::uint64_t h_r = 0;
  std::uint64_t i_b = 0;
  double alpha = 0.0;
  std::uint64_t h_s = 0;
  std::uint64_t q_cap = 0;
  std::uint32_t fudge = kDefaultFudge;

  std::uint64_t disk_buffer_bytes() const noexcept {
    return std::uint64_t{n_disk_buffers} * d_b * kMasterRecordSize;
  }
  std::uint64_t cache_bytes() const noexcept { return h_r * kMasterRecordSize; }
  std::uint64_t intermediate_bytes() const noexcept { return i_b * kStreamRecordSize; }
  std::uint64_t stream_store_bytes() const noexcept {
    return h_s * fudge * kStreamRecordSize;
  }
  std::uint64_t queue_bytes() const noexcept { return q_cap * kQueueEntrySize; }
  // M minus disk buffers, cache and intermediate buffer.
  std::uint64_t remainder_bytes() const noexcept {
    return total_bytes - disk_buffer_bytes() - cache_bytes() - intermediate_bytes();
  }
  std::uint64_t slack_bytes() const noexcept {
    return remainder_bytes() - stream_store_bytes() - queue_bytes();
  }
  // Stream records the join can hold: every resident record needs an entry
  // in both the hash table and the queue.
  std::uint64_t stream_capacity() const noexcept { return h_s < q_cap ? h_s : q_cap; }
};

// Alpha that gives the hash table and the queue equal record capacity.
double auto_alpha(std::uint32_t fudge = kDefaultFudge) noexcept;

// Throws kInsufficientMemory naming the component that does not fit.
MemoryBudget plan_budget(const BudgetRequest& request);

}  // namespace cachejoin
