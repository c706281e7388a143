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

// OP-CACHEJOIN: P-CACHEJOIN with two disk buffers. Buffer 0 is refilled at
// the oldest queued key and buffer 1 at the newest, each by its own loader,
// so one partition is read while DP probes the other.

#include <sstream>

#include "cachejoin/disk_buffer.hpp"
#include "cachejoin/error.hpp"
#include "cachejoin/intermediate_buffer.hpp"
#include "engine_internal.hpp"

namespace cachejoin {

namespace {

constexpr std::size_t kOldestBuffer = 0;
constexpr std::size_t kNewestBuffer = 1;

JoinKey next_index_key(const StreamStore& hs, std::size_t buffer) {
  return buffer == kOldestBuffer ? *hs.oldest_key() : *hs.newest_key();
}

}  // namespace

RunReport run_opcachejoin(const EngineConfig& config) {
  using detail::Clock;
  using detail::elapsed_ns;

  detail::RunContext ctx(config);
  JoinState state(ctx.budget().stream_capacity(), ctx.budget().h_r, ctx.join_options());
  StreamStore& hs = state.stream_store();
  IntermediateBuffer ib(ctx.budget().i_b);
  DiskBufferGroup group(2);
  OutputSink sp_sink(config.collect_outputs, ctx.file_sink());
  OutputSink dp_sink(config.collect_outputs, ctx.file_sink());
  detail::SpCounters sp;
  std::atomic<bool> abort{false};
  RunReport report;

  auto loader = [&](std::size_t i) {
    DiskBuffer& b = group.buffer(i);
    while (auto key = group.claim_for_load(i)) {
      const auto t0 = Clock::now();
      ctx.store().read_partition(*key, ctx.budget().d_b, b.partition);
      b.load_ns = elapsed_ns(t0, Clock::now());
      b.loaded_from = *key;
      if (group.transition(i, BufferStatus::kLoading, BufferStatus::kFull) !=
          TransitionOutcome::kSuccess) {
        fail(ErrorCode::kInternal, "disk buffer left LOADING while its loader held it");
      }
    }
  };

  auto dp_worker = [&] {
    std::vector<StreamRecord> scratch;
    std::size_t preferred = kOldestBuffer;
    auto last = ctx.started();
    while (!abort.load(std::memory_order_relaxed)) {
      const detail::AbsorbResult in = detail::absorb_intermediate(ib, hs, scratch);
      const bool draining = ib.drained();
      if (hs.empty()) {
        if (draining) break;
        continue;
      }
      // A buffer released while H_S was empty still needs a key.
      for (std::size_t i = 0; i < group.size(); ++i) {
        if (group.status(i) == BufferStatus::kEmpty && !group.has_index_key(i)) {
          group.assign_index_key(i, next_index_key(hs, i));
        }
      }
      if (hs.size() < ctx.fill_trigger() && !in.ib_emptied && !draining) continue;

      const auto t0 = Clock::now();
      const auto idx = group.claim_full(preferred);
      if (!idx) break;
      const auto t1 = Clock::now();
      DiskBuffer& b = group.buffer(*idx);
      const DpResult dp = state.dp_step(b.partition, dp_sink);
      report.orphan_count += state.orphan_check(b.loaded_from, draining);
      const std::int64_t load_ns = b.load_ns;
      if (!hs.empty()) group.assign_index_key(*idx, next_index_key(hs, *idx));
      group.transition(*idx, BufferStatus::kBusy, BufferStatus::kEmpty);
      const auto t2 = Clock::now();
      preferred = 1 - *idx;

      IterationStats it;
      it.omega_n = sp.hits.exchange(0, std::memory_order_relaxed);
      it.sp_ns = sp.busy_ns.exchange(0, std::memory_order_relaxed);
      it.omega_s = dp.matched;
      it.load_ns = load_ns;
      it.stall_ns = elapsed_ns(t0, t1);
      it.dp_ns = elapsed_ns(t1, t2);
      it.loop_ns = elapsed_ns(last, t2);
      it.hs_size = hs.size();
      it.draining = draining;
      last = t2;
      report.promotions += dp.promotions;
      if (hs.size() != hs.queue_size() ||
          (config.deep_structure_checks && !hs.check_invariants())) {
        ++report.structure_violations;
      }
      ctx.add_iteration(report, it);
    }
    group.shutdown();
  };

  ctx.start_clock();
  {
    detail::Supervisor sup([&] {
      abort.store(true);
      ib.shutdown();
      group.shutdown();
    });
    sup.spawn("stream-probing worker", "cj-stream",
              [&] { detail::run_sp_worker(ctx, state, ib, sp_sink, sp, abort); });
    sup.spawn("disk-probing worker", "cj-disk", dp_worker);
    sup.spawn("loader for the oldest-key buffer", "cj-load-oldest", [&] { loader(kOldestBuffer); });
    sup.spawn("loader for the newest-key buffer", "cj-load-newest", [&] { loader(kNewestBuffer); });
    sup.join(0, config.shutdown_timeout, [&] {
      std::ostringstream d;
      d << "H_S holds " << hs.size() << " records, I_B holds " << ib.size()
        << ", disk buffers " << buffer_status_name(group.status(0)) << '/'
        << buffer_status_name(group.status(1));
      return d.str();
    });
  }

  report.cache_hits = 0;
  for (const auto& it : report.iterations) report.cache_hits += it.omega_n;
  report.cache_hits += sp.hits.load();
  report.cache_lookups = sp.lookups.load();
  report.stream_consumed = sp.consumed.load();
  ctx.finish(report, {&sp_sink, &dp_sink}, state);
  return report;
}

}  // namespace cachejoin
