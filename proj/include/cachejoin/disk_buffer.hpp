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

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "cachejoin/master_store.hpp"
#include "cachejoin/records.hpp"

namespace cachejoin {

enum class BufferStatus : std::uint8_t { kEmpty, kLoading, kFull, kBusy };

const char* buffer_status_name(BufferStatus s) noexcept;

// EMPTY->LOADING->FULL->BUSY->EMPTY.
bool is_legal_transition(BufferStatus from, BufferStatus to) noexcept;

enum class TransitionOutcome { kSuccess, kContention };

// One disk buffer slot. The partition and load metadata are touched only by
// whichever worker currently owns the slot: the loader while LOADING, the
// prober while BUSY.
struct DiskBuffer {
  Partition partition;
  std::optional<JoinKey> index_key;  // key the next load starts from
  JoinKey loaded_from = 0;           // index key of the current contents
  std::int64_t load_ns = 0;          // duration of the last fill
  BufferStatus status = BufferStatus::kEmpty;
};

// A set of disk buffers sharing one lock. Status changes are
// compare-and-transition: they succeed only from the expected status. Each
// buffer's loader has its own wakeup channel and the prober has one, so a
// change wakes only the side that can act on it.
class DiskBufferGroup {
 public:
  explicit DiskBufferGroup(std::size_t n);

  std::size_t size() const noexcept { return buffers_.size(); }
  DiskBuffer& buffer(std::size_t i) noexcept { return buffers_[i]; }
  BufferStatus status(std::size_t i) const;

  // Throws kContractViolation for an illegal edge.
  TransitionOutcome transition(std::size_t i, BufferStatus from, BufferStatus to);

  // Assigns the next load key of an EMPTY buffer and wakes its loader.
  void assign_index_key(std::size_t i, JoinKey key);
  bool has_index_key(std::size_t i) const;

  // Loader side: waits until buffer i is EMPTY with an index key, then
  // claims it (EMPTY->LOADING). Returns the key, or nullopt on shutdown.
  std::optional<JoinKey> claim_for_load(std::size_t i);

  // Prober side: claims a FULL buffer (FULL->BUSY), preferring `preferred`.
  // Waits if none is FULL. nullopt on shutdown.
  std::optional<std::size_t> claim_full(std::size_t preferred);

  // Waits until buffer i reaches status s or the group is shut down.
  bool wait_for(std::size_t i, BufferStatus s);

  void shutdown();
  bool is_shut_down() const;

 private:
  std::vector<DiskBuffer> buffers_;
  bool shut_down_ = false;
  void notify(std::size_t i, BufferStatus to);

  mutable std::mutex mu_;
  std::vector<std::condition_variable> loader_cv_;
  std::condition_variable prober_cv_;
  // Any-status waiters (wait_for).
  std::condition_variable any_cv_;
};

}  // namespace cachejoin
