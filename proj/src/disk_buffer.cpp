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

#include "cachejoin/disk_buffer.hpp"

#include <string>

#include "cachejoin/error.hpp"

namespace cachejoin {

const char* buffer_status_name(BufferStatus s) noexcept {
  switch (s) {
    case BufferStatus::kEmpty: return "EMPTY";
    case BufferStatus::kLoading: return "LOADING";
    case BufferStatus::kFull: return "FULL";
    case BufferStatus::kBusy: return "BUSY";
  }
  return "?";
}

bool is_legal_transition(BufferStatus from, BufferStatus to) noexcept {
  return (from == BufferStatus::kEmpty && to == BufferStatus::kLoading) ||
         (from == BufferStatus::kLoading && to == BufferStatus::kFull) ||
         (from == BufferStatus::kFull && to == BufferStatus::kBusy) ||
         (from == BufferStatus::kBusy && to == BufferStatus::kEmpty);
}

DiskBufferGroup::DiskBufferGroup(std::size_t n) : buffers_(n), loader_cv_(n) {}

void DiskBufferGroup::notify(std::size_t i, BufferStatus to) {
  if (to == BufferStatus::kEmpty) loader_cv_[i].notify_one();
  if (to == BufferStatus::kFull) prober_cv_.notify_one();
  any_cv_.notify_all();
}

BufferStatus DiskBufferGroup::status(std::size_t i) const {
  std::lock_guard lock(mu_);
  return buffers_[i].status;
}

TransitionOutcome DiskBufferGroup::transition(std::size_t i, BufferStatus from,
                                              BufferStatus to) {
  if (!is_legal_transition(from, to)) {
    fail(ErrorCode::kContractViolation, std::string("illegal disk buffer transition ") +
                                            buffer_status_name(from) + " -> " +
                                            buffer_status_name(to));
  }
  {
    std::lock_guard lock(mu_);
    if (buffers_[i].status != from) return TransitionOutcome::kContention;
    buffers_[i].status = to;
  }
  notify(i, to);
  return TransitionOutcome::kSuccess;
}

void DiskBufferGroup::assign_index_key(std::size_t i, JoinKey key) {
  {
    std::lock_guard lock(mu_);
    buffers_[i].index_key = key;
  }
  loader_cv_[i].notify_one();
}

bool DiskBufferGroup::has_index_key(std::size_t i) const {
  std::lock_guard lock(mu_);
  return buffers_[i].index_key.has_value();
}

std::optional<JoinKey> DiskBufferGroup::claim_for_load(std::size_t i) {
  std::unique_lock lock(mu_);
  DiskBuffer& b = buffers_[i];
  loader_cv_[i].wait(lock, [&] {
    return shut_down_ || (b.status == BufferStatus::kEmpty && b.index_key.has_value());
  });
  if (shut_down_) return std::nullopt;
  b.status = BufferStatus::kLoading;
  const JoinKey key = *b.index_key;
  b.index_key.reset();
  lock.unlock();
  any_cv_.notify_all();
  return key;
}

std::optional<std::size_t> DiskBufferGroup::claim_full(std::size_t preferred) {
  std::unique_lock lock(mu_);
  std::optional<std::size_t> found;
  prober_cv_.wait(lock, [&] {
    if (shut_down_) return true;
    for (std::size_t k = 0; k < buffers_.size(); ++k) {
      const std::size_t i = (preferred + k) % buffers_.size();
      if (buffers_[i].status == BufferStatus::kFull) {
        found = i;
        return true;
      }
    }
    return false;
  });
  if (!found) return std::nullopt;
  buffers_[*found].status = BufferStatus::kBusy;
  lock.unlock();
  any_cv_.notify_all();
  return found;
}

bool DiskBufferGroup::wait_for(std::size_t i, BufferStatus s) {
  std::unique_lock lock(mu_);
  any_cv_.wait(lock, [&] { return shut_down_ || buffers_[i].status == s; });
  return buffers_[i].status == s;
}

void DiskBufferGroup::shutdown() {
  {
    std::lock_guard lock(mu_);
    shut_down_ = true;
  }
  for (auto& cv : loader_cv_) cv.notify_all();
  prober_cv_.notify_all();
  any_cv_.notify_all();
}

bool DiskBufferGroup::is_shut_down() const {
  std::lock_guard lock(mu_);
  return shut_down_;
}

}  // namespace cachejoin
