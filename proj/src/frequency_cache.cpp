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

#include "cachejoin/frequency_cache.hpp"

#include <algorithm>

namespace cachejoin {

FrequencyCache::FrequencyCache(std::size_t capacity)
    : capacity_(capacity), entries_(std::make_unique<Entry[]>(capacity)) {
  slots_.reserve(capacity);
  heap_.reserve(capacity);
}

namespace {

// std heap functions build a max-heap; invert for the minimum first.
struct HeapAfter {
  template <class E>
  bool operator()(const E& a, const E& b) const noexcept {
    return a.freq != b.freq ? a.freq > b.freq : a.tick > b.tick;
  }
};

}  // namespace

void FrequencyCache::push_heap_entry(std::size_t slot) {
  const Entry& e = entries_[slot];
  heap_.push_back({e.freq.load(std::memory_order_relaxed), e.tick, slot});
  std::push_heap(heap_.begin(), heap_.end(), HeapAfter{});
}

std::size_t FrequencyCache::pop_victim() {
  // Caller holds the exclusive lock, so no counter moves meanwhile.
  while (true) {
    std::pop_heap(heap_.begin(), heap_.end(), HeapAfter{});
    const HeapEntry top = heap_.back();
    heap_.pop_back();
    const Entry& e = entries_[top.slot];
    if (e.tick != top.tick) continue;  // the record was already evicted
    const std::uint64_t freq = e.freq.load(std::memory_order_relaxed);
    if (freq == top.freq) return top.slot;
    push_heap_entry(top.slot);  // counter grew since the snapshot
  }
}

std::size_t FrequencyCache::size() const {
  std::shared_lock lock(mu_);
  return used_;
}

std::optional<MasterRecord> FrequencyCache::lookup(JoinKey key) {
  std::optional<MasterRecord> out;
  lookup_with(key, [&](const MasterRecord& r) { out = r; });
  return out;
}

std::optional<JoinKey> FrequencyCache::promote(const MasterRecord& rec,
                                               std::uint64_t observed_freq) {
  if (capacity_ == 0) return std::nullopt;
  std::unique_lock lock(mu_);
  if (auto it = slots_.find(rec.key); it != slots_.end()) {
    Entry& e = entries_[it->second];
    if (e.freq.load(std::memory_order_relaxed) < observed_freq) {
      e.freq.store(observed_freq, std::memory_order_relaxed);
    }
    return std::nullopt;
  }

  std::optional<JoinKey> evicted;
  std::size_t slot;
  if (used_ < capacity_) {
    slot = used_++;
  } else {
    slot = pop_victim();
    evicted = entries_[slot].rec.key;
    slots_.erase(*evicted);
  }
  Entry& e = entries_[slot];
  e.rec = rec;
  e.freq.store(observed_freq, std::memory_order_relaxed);
  e.tick = next_tick_++;
  slots_.emplace(rec.key, slot);
  push_heap_entry(slot);
  return evicted;
}

bool FrequencyCache::contains(JoinKey key) const {
  std::shared_lock lock(mu_);
  return slots_.count(key) != 0;
}

std::optional<std::uint64_t> FrequencyCache::frequency(JoinKey key) const {
  std::shared_lock lock(mu_);
  auto it = slots_.find(key);
  if (it == slots_.end()) return std::nullopt;
  return entries_[it->second].freq.load(std::memory_order_relaxed);
}

std::vector<MasterRecord> FrequencyCache::snapshot() const {
  std::shared_lock lock(mu_);
  std::vector<MasterRecord> out;
  out.reserve(used_);
  for (std::size_t i = 0; i < used_; ++i) out.push_back(entries_[i].rec);
  return out;
}

}  // namespace cachejoin
