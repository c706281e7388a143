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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "cachejoin/records.hpp"

namespace cachejoin {

// Cache of hot master records (H_R). Lookups take a shared lock and bump an
// atomic counter, so the stream-probing side never blocks another lookup;
// promotion takes the lock exclusively. A reader sees an entry either fully
// before or fully after a promotion.
//
// Eviction picks the lowest counter; ties go to the oldest insertion.
class FrequencyCache {
 public:
  explicit FrequencyCache(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const;

  // On a hit calls on_hit(const MasterRecord&) under the shared lock and
  // increments the counter.
  template <class OnHit>
  bool lookup_with(JoinKey key, OnHit&& on_hit);
  // lookup_with for every key of `keys` under one shared lock. Calls
  // on_hit(i, const MasterRecord&) or on_miss(i) for the i-th key, in order.
  template <class Keys, class OnHit, class OnMiss>
  void lookup_each(const Keys& keys, OnHit&& on_hit, OnMiss&& on_miss);
  std::optional<MasterRecord> lookup(JoinKey key);

  // Inserts with counter = observed_freq. Returns the evicted key, if any.
  // A key that is already cached only has its counter raised.
  std::optional<JoinKey> promote(const MasterRecord& rec, std::uint64_t observed_freq);

  bool contains(JoinKey key) const;
  std::optional<std::uint64_t> frequency(JoinKey key) const;
  std::vector<MasterRecord> snapshot() const;

 private:
  struct Entry {
    MasterRecord rec;
    std::atomic<std::uint64_t> freq{0};
    std::uint64_t tick = 0;
  };

  std::size_t capacity_;
  std::unique_ptr<Entry[]> entries_;
  std::size_t used_ = 0;
  std::uint64_t next_tick_ = 0;
  // Min-heap on (frequency, tick) for eviction. Entries are snapshots:
  // counters only grow, so an entry whose snapshot is behind its slot is
  // refreshed when it surfaces, and one whose tick is stale belongs to an
  // evicted record and is dropped.
  struct HeapEntry {
    std::uint64_t freq;
    std::uint64_t tick;
    std::size_t slot;
  };
  std::size_t pop_victim();
  void push_heap_entry(std::size_t slot);

  std::unordered_map<JoinKey, std::size_t> slots_;
  std::vector<HeapEntry> heap_;
  mutable std::shared_mutex mu_;
};

template <class OnHit>
bool FrequencyCache::lookup_with(JoinKey key, OnHit&& on_hit) {
  std::shared_lock lock(mu_);
  auto it = slots_.find(key);
  if (it == slots_.end()) return false;
  Entry& e = entries_[it->second];
  e.freq.fetch_add(1, std::memory_order_relaxed);
  on_hit(static_cast<const MasterRecord&>(e.rec));
  return true;
}

template <class Keys, class OnHit, class OnMiss>
void FrequencyCache::lookup_each(const Keys& keys, OnHit&& on_hit, OnMiss&& on_miss) {
  std::shared_lock lock(mu_);
  std::size_t i = 0;
  for (const JoinKey key : keys) {
    auto it = slots_.find(key);
    if (it == slots_.end()) {
      on_miss(i++);
      continue;
    }
    Entry& e = entries_[it->second];
    e.freq.fetch_add(1, std::memory_order_relaxed);
    on_hit(i++, static_cast<const MasterRecord&>(e.rec));
  }
}

}  // namespace cachejoin
