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

#include "cachejoin/stream_store.hpp"

#include "cachejoin/error.hpp"

namespace cachejoin {

StreamStore::StreamStore(std::size_t capacity) {
  if (capacity == 0) fail(ErrorCode::kInvalidArgument, "stream store capacity must be positive");
  if (capacity >= kNil) fail(ErrorCode::kCapacity, "stream store capacity too large");
  nodes_.resize(capacity);
  for (std::size_t i = 0; i < capacity; ++i) {
    nodes_[i].next_same = i + 1 < capacity ? static_cast<Handle>(i + 1) : kNil;
  }
  free_ = 0;
  chains_.reserve(capacity);
}

std::optional<StreamStore::Handle> StreamStore::insert(const StreamRecord& rec) {
  if (free_ == kNil) return std::nullopt;
  const Handle h = free_;
  Node& node = nodes_[h];
  free_ = node.next_same;
  node.rec = rec;
  node.next_same = kNil;

  // Enqueue at the front.
  node.older = front_;
  node.newer = kNil;
  if (front_ != kNil) nodes_[front_].newer = h;
  front_ = h;
  if (rear_ == kNil) rear_ = h;
  ++queue_size_;

  Chain& c = chains_[rec.fkey];
  if (c.tail == kNil) {
    c.head = h;
  } else {
    nodes_[c.tail].next_same = h;
  }
  c.tail = h;
  ++c.count;
  ++size_;
  return h;
}

void StreamStore::unlink_queue(Handle h) noexcept {
  Node& node = nodes_[h];
  if (node.older != kNil) nodes_[node.older].newer = node.newer; else rear_ = node.newer;
  if (node.newer != kNil) nodes_[node.newer].older = node.older; else front_ = node.older;
  node.older = node.newer = kNil;
  --queue_size_;
}

std::vector<StreamRecord> StreamStore::match_and_evict(JoinKey key) {
  std::vector<StreamRecord> out;
  match_and_evict(key, [&](const StreamRecord& r) { out.push_back(r); });
  return out;
}

std::optional<JoinKey> StreamStore::oldest_key() const noexcept {
  if (rear_ == kNil) return std::nullopt;
  return nodes_[rear_].rec.fkey;
}

std::optional<JoinKey> StreamStore::newest_key() const noexcept {
  if (front_ == kNil) return std::nullopt;
  return nodes_[front_].rec.fkey;
}

std::size_t StreamStore::count(JoinKey key) const {
  auto it = chains_.find(key);
  return it == chains_.end() ? 0 : it->second.count;
}

std::uint32_t StreamStore::mark_orphan(JoinKey key) {
  auto it = chains_.find(key);
  if (it == chains_.end()) return 0;
  return ++it->second.orphan_marks;
}

std::vector<JoinKey> StreamStore::queue_keys() const {
  std::vector<JoinKey> keys;
  keys.reserve(queue_size_);
  for (Handle h = rear_; h != kNil; h = nodes_[h].newer) keys.push_back(nodes_[h].rec.fkey);
  return keys;
}

bool StreamStore::check_invariants() const {
  std::size_t walked = 0;
  Handle prev = kNil;
  for (Handle h = rear_; h != kNil; h = nodes_[h].newer) {
    if (nodes_[h].older != prev) return false;
    if (!contains(nodes_[h].rec.fkey)) return false;
    prev = h;
    if (++walked > nodes_.size()) return false;
  }
  if (prev != front_) return false;
  std::size_t chained = 0;
  for (const auto& [key, c] : chains_) {
    std::uint32_t n = 0;
    for (Handle h = c.head; h != kNil; h = nodes_[h].next_same) {
      if (nodes_[h].rec.fkey != key) return false;
      if (nodes_[h].next_same == kNil && h != c.tail) return false;
      ++n;
    }
    if (n != c.count || n == 0) return false;
    chained += n;
  }
  std::size_t free_count = 0;
  for (Handle h = free_; h != kNil; h = nodes_[h].next_same) {
    if (++free_count > nodes_.size()) return false;
  }
  return walked == queue_size_ && chained == size_ && size_ == queue_size_ &&
         free_count + size_ == nodes_.size();
}

}  // namespace cachejoin
