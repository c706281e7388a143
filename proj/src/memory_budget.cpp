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

#include "cachejoin/memory_budget.hpp"

#include <cmath>
#include <string>

#include "cachejoin/error.hpp"

namespace cachejoin {

double auto_alpha(std::uint32_t fudge) noexcept {
  const double hs = double(fudge) * kStreamRecordSize;
  return hs / (hs + kQueueEntrySize);
}

MemoryBudget plan_budget(const BudgetRequest& req) {
  if (req.total_bytes == 0) fail(ErrorCode::kInvalidArgument, "total memory must be positive");
  if (req.d_b == 0) fail(ErrorCode::kInvalidArgument, "d_B must be at least 1 record");
  if (req.n_disk_buffers != 1 && req.n_disk_buffers != 2) {
    fail(ErrorCode::kInvalidArgument, "engines use one or two disk buffers");
  }
  if (req.fudge == 0) fail(ErrorCode::kInvalidArgument, "fudge factor must be positive");
  if (req.alpha && !(*req.alpha > 0.0 && *req.alpha < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "alpha must lie strictly between 0 and 1");
  }

  MemoryBudget b;
  b.total_bytes = req.total_bytes;
  b.d_b = req.d_b;
  b.n_disk_buffers = req.n_disk_buffers;
  b.h_r = req.h_r;
  b.i_b = req.i_b_bytes / kStreamRecordSize;
  b.fudge = req.fudge;

  const std::uint64_t m = req.total_bytes;
  auto too_big = [&](const char* component, std::uint64_t bytes) {
    fail(ErrorCode::kInsufficientMemory,
         std::string(component) + " needs " + std::to_string(bytes) +
             " bytes, which does not fit in the memory budget of " + std::to_string(m) +
             " bytes");
  };
  if (b.disk_buffer_bytes() >= m) too_big("disk buffers", b.disk_buffer_bytes());
  if (b.cache_bytes() >= m) too_big("frequency cache", b.cache_bytes());
  if (b.intermediate_bytes() >= m) too_big("intermediate buffer", b.intermediate_bytes());

  std::uint64_t used = b.disk_buffer_bytes();
  used += b.cache_bytes();
  if (used >= m) too_big("disk buffers + frequency cache", used);
  used += b.intermediate_bytes();
  if (used >= m) too_big("disk buffers + frequency cache + intermediate buffer", used);

  const std::uint64_t rem = m - used;
  const std::uint64_t per_hs = std::uint64_t{req.fudge} * kStreamRecordSize;
  if (!req.alpha) {
    b.alpha = auto_alpha(req.fudge);
    b.h_s = rem / (per_hs + kQueueEntrySize);
    b.q_cap = b.h_s;
  } else {
    b.alpha = *req.alpha;
    b.h_s = static_cast<std::uint64_t>(std::floor(b.alpha * double(rem) / double(per_hs)));
    b.q_cap = static_cast<std::uint64_t>(
        std::floor((1.0 - b.alpha) * double(rem) / double(kQueueEntrySize)));
    // Guard against rounding pushing the pair past the remainder.
    while (b.h_s * per_hs + b.q_cap * kQueueEntrySize > rem) {
      if (b.q_cap > 0) --b.q_cap; else --b.h_s;
    }
  }
  if (b.stream_capacity() == 0) {
    too_big("stream hash table and queue (no room for a single stream record)",
            used + per_hs + kQueueEntrySize);
  }
  return b;
}

}  // namespace cachejoin
