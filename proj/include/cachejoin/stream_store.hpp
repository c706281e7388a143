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

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cachejoin/records.hpp"

namespace cachejoin {

// Multi-map of buffered stream records (H_S) coupled with the FIFO of their
// join keys (Q). Each resident record owns exactly one queue entry; both
// live in one node so removal from either side is O(1).
//
// Queue orientation: the rear holds the oldest entry, the front the newest.
// Single-owner; not thread-safe.
class StreamStore {
 public:
  using Handle = std::uint32_t;

  explicit StreamStore(std::size_t capacity);

  std::size_t capacity() const noexcept { return nodes_.size(); }
  std::size_t size() const noexcept { return size_; }
  std::size_t queue_size() const noexcept { return queue_size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool full() const noexcept { return size_ == nodes_.size(); }
  std::size_t free_slots() const noexcept { return nodes_.size() - size_; }
  std::size_t distinct_keys() const noexcept { return chains_.size(); }

  // nullopt when the store is at capacity; the store is left unchanged.
  std::optional<Handle> insert(const StreamRecord& rec);

  // Removes every record with the key from the table and the queue, calling
  // on_match(const StreamRecord&) for each in insertion order. Returns the
  // number removed.
  template <class OnMatch>
  std::size_t match_and_evict(JoinKey key, OnMatch&& on_match);
  std::vector<StreamRecord> match_and_evict(JoinKey key);

  // Rear (oldest) and front (newest) of the queue.
  std::optional<JoinKey> oldest_key() const noexcept;
  std::optional<JoinKey> newest_key() const noexcept;

  bool contains(JoinKey key) const { return chains_.count(key) != 0; }
  std::size_t count(JoinKey key) const;

  // Orphan bookkeeping for a key that was used to index a partition but was
  // not found in it. Returns the mark count after this call (0 when no
  // record with the key is resident).
  std::uint32_t mark_orphan(JoinKey key);

  // Queue keys from oldest to newest.
  std::vector<JoinKey> queue_keys() const;
  // Walks every structure and cross-checks counts and linkage.
  bool check_invariants() const;

 private:
  static constexpr Handle kNil = std::numeric_limits<Handle>::max();

  struct Node {
    StreamRecord rec;
    Handle older = kNil;  // toward the rear
    Handle newer = kNil;  // toward the front
    Handle next_same = kNil;  // next record with the same key, or free list
  };
  struct Chain {
    Handle head = kNil;
    Handle tail = kNil;
    std::uint32_t count = 0;
    std::uint32_t orphan_marks = 0;
  };

  void unlink_queue(Handle h) noexcept;

  std::vector<Node> nodes_;
  std::unordered_map<JoinKey, Chain> chains_;
  Handle free_ = kNil;
  Handle rear_ = kNil;
  Handle front_ = kNil;
  std::size_t size_ = 0;
  std::size_t queue_size_ = 0;
};

template <class OnMatch>
std::size_t StreamStore::match_and_evict(JoinKey key, OnMatch&& on_match) {
  auto it = chains_.find(key);
  if (it == chains_.end()) return 0;
  std::size_t n = 0;
  Handle h = it->second.head;
  while (h != kNil) {
    Node& node = nodes_[h];
    on_match(static_cast<const StreamRecord&>(node.rec));
    unlink_queue(h);
    const Handle next = node.next_same;
    node.next_same = free_;
    free_ = h;
    h = next;
    ++n;
  }
  size_ -= n;
  chains_.erase(it);
  return n;
}

}  // namespace cachejoin
