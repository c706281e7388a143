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

#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "cachejoin/records.hpp"

namespace cachejoin {

// Bounded blocking FIFO between the stream-probing producer and the
// disk-probing consumer (I_B). After shutdown() pushes fail immediately and
// pops return what is left, then report termination.
class IntermediateBuffer {
 public:
  explicit IntermediateBuffer(std::size_t capacity);

  std::size_t capacity() const noexcept { return ring_.size(); }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  // Blocks while full. False once shut down; the record is not stored.
  bool push(const StreamRecord& rec);
  // Blocks while empty. nullopt once shut down and drained.
  std::optional<StreamRecord> pop();

  // Pushes every record, blocking for space as needed. False if shutdown
  // interrupted the batch.
  bool push_batch(std::span<const StreamRecord> recs);
  // Appends up to max records to out. With wait, blocks until at least one
  // record is available or the buffer is shut down and drained.
  std::size_t pop_batch(std::vector<StreamRecord>& out, std::size_t max, bool wait);

  void shutdown();
  bool is_shut_down() const;
  // Shut down with nothing left to pop.
  bool drained() const;

 private:
  std::vector<StreamRecord> ring_;
  std::size_t head_ = 0;  // next pop
  std::size_t count_ = 0;
  bool shut_down_ = false;
  std::size_t producers_waiting_ = 0;
  std::size_t consumers_waiting_ = 0;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
};

}  // namespace cachejoin
