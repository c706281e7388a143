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

// Sequential CACHEJOIN: one outer-loop iteration is an SP phase that runs
// until H_S is full (or the stream buffer is empty) followed by a DP phase
// that loads one partition at the oldest queued key and probes it.

#include <algorithm>

#include "engine_internal.hpp"

namespace cachejoin {

RunReport run_cachejoin(const EngineConfig& config) {
  using detail::Clock;
  using detail::elapsed_ns;

  detail::RunContext ctx(config);
  JoinState state(ctx.budget().stream_capacity(), ctx.budget().h_r, ctx.join_options());
  StreamStore& hs = state.stream_store();
  OutputSink sink(config.collect_outputs, ctx.file_sink());
  StreamBuffer& sb = ctx.stream_buffer();
  Partition partition;

  RunReport report;
  std::vector<StreamRecord> batch;
  std::vector<StreamRecord> misses;
  batch.reserve(sb.capacity_records());
  misses.reserve(sb.capacity_records());

  std::uint64_t consumed = 0;
  bool stream_done = false;
  ctx.start_clock();

  while (true) {
    IterationStats it;
    const auto t0 = Clock::now();
    if (!stream_done && ctx.should_stop(consumed, t0)) stream_done = true;

    // SP phase.
    while (!stream_done && !hs.full()) {
      const std::size_t k = static_cast<std::size_t>(std::min<std::uint64_t>(
          {hs.free_slots(), ctx.remaining(consumed), sb.capacity_records()}));
      batch.clear();
      misses.clear();
      const std::size_t got = sb.take(k, batch);
      consumed += got;
      if (got > 0) {
        it.omega_n += state.sp_step(batch, sink, misses);
        report.cache_lookups += got;
        for (const auto& m : misses) hs.insert(m);
      }
      if (got < k || ctx.should_stop(consumed, Clock::now())) stream_done = true;
    }
    const auto t1 = Clock::now();
    it.sp_ns = elapsed_ns(t0, t1);
    report.cache_hits += it.omega_n;

    if (hs.empty()) {
      if (stream_done) {
        if (it.omega_n > 0) {
          it.loop_ns = elapsed_ns(t0, t1);
          it.draining = true;
          ctx.add_iteration(report, it);
        }
        break;
      }
      continue;
    }

    // DP phase.
    const JoinKey index_key = *hs.oldest_key();
    ctx.store().read_partition(index_key, ctx.budget().d_b, partition);
    const auto t2 = Clock::now();
    const DpResult dp = state.dp_step(partition, sink);
    report.orphan_count += state.orphan_check(index_key, stream_done);
    const auto t3 = Clock::now();

    it.omega_s = dp.matched;
    report.promotions += dp.promotions;
    it.load_ns = elapsed_ns(t1, t2);
    it.stall_ns = it.load_ns;  // the load is synchronous
    it.dp_ns = elapsed_ns(t2, t3);
    it.loop_ns = elapsed_ns(t0, t3);
    it.hs_size = hs.size();
    it.draining = stream_done;
    if (hs.size() != hs.queue_size() ||
        (config.deep_structure_checks && !hs.check_invariants())) {
      ++report.structure_violations;
    }
    ctx.add_iteration(report, it);
  }

  report.stream_consumed = consumed;
  ctx.finish(report, {&sink}, state);
  return report;
}

}  // namespace cachejoin
