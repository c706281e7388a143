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

#include "cachejoin/intermediate_buffer.hpp"

#include <algorithm>

#include "cachejoin/error.hpp"

namespace cachejoin {

IntermediateBuffer::IntermediateBuffer(std::size_t capacity) : ring_(capacity) {
  if (capacity == 0) fail(ErrorCode::kInvalidArgument, "intermediate buffer capacity must be positive");
}

std::size_t IntermediateBuffer::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

bool IntermediateBuffer::push(const StreamRecord& rec) {
  return push_batch(std::span<const StreamRecord>(&rec, 1));
}

std::optional<StreamRecord> IntermediateBuffer::pop() {
  std::vector<StreamRecord> out;
  if (pop_batch(out, 1, true) == 0) return std::nullopt;
  return out.front();
}

bool IntermediateBuffer::push_batch(std::span<const StreamRecord> recs) {
  std::unique_lock lock(mu_);
  std::size_t done = 0;
  while (done < recs.size()) {
    if (count_ == ring_.size() && !shut_down_) {
      ++producers_waiting_;
      not_full_.wait(lock, [&] { return count_ < ring_.size() || shut_down_; });
      --producers_waiting_;
    }
    if (shut_down_) return false;
    const std::size_t n = std::min(recs.size() - done, ring_.size() - count_);
    for (std::size_t i = 0; i < n; ++i) {
      ring_[(head_ + count_ + i) % ring_.size()] = recs[done + i];
    }
    count_ += n;
    done += n;
    if (consumers_waiting_ > 0) not_empty_.notify_one();
  }
  return true;
}

std::size_t IntermediateBuffer::pop_batch(std::vector<StreamRecord>& out, std::size_t max,
                                          bool wait) {
  std::unique_lock lock(mu_);
  if (wait && count_ == 0 && !shut_down_) {
    ++consumers_waiting_;
    not_empty_.wait(lock, [&] { return count_ > 0 || shut_down_; });
    --consumers_waiting_;
  }
  const std::size_t n = std::min(max, count_);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ring_[head_]);
    head_ = (head_ + 1) % ring_.size();
  }
  count_ -= n;
  if (n > 0 && producers_waiting_ > 0) not_full_.notify_one();
  return n;
}

void IntermediateBuffer::shutdown() {
  {
    std::lock_guard lock(mu_);
    shut_down_ = true;
  }
  not_full_.notify_all();
  not_empty_.notify_all();
}

bool IntermediateBuffer::is_shut_down() const {
  std::lock_guard lock(mu_);
  return shut_down_;
}

bool IntermediateBuffer::drained() const {
  std::lock_guard lock(mu_);
  return shut_down_ && count_ == 0;
}

}  // namespace cachejoin
