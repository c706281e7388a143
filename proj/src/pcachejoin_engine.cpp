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

// P-CACHEJOIN: the SP worker probes the stream against H_R and forwards
// misses through I_B; the DP worker moves them into H_S and, once H_S is at
// its fill trigger (or I_B has run dry), loads and probes one partition.

#include <sstream>

#include "cachejoin/intermediate_buffer.hpp"
#include "engine_internal.hpp"

namespace cachejoin {

RunReport run_pcachejoin(const EngineConfig& config) {
  using detail::Clock;
  using detail::elapsed_ns;

  detail::RunContext ctx(config);
  JoinState state(ctx.budget().stream_capacity(), ctx.budget().h_r, ctx.join_options());
  StreamStore& hs = state.stream_store();
  IntermediateBuffer ib(ctx.budget().i_b);
  OutputSink sp_sink(config.collect_outputs, ctx.file_sink());
  OutputSink dp_sink(config.collect_outputs, ctx.file_sink());
  detail::SpCounters sp;
  std::atomic<bool> abort{false};
  RunReport report;

  auto dp_worker = [&] {
    Partition partition;
    std::vector<StreamRecord> scratch;
    auto last = ctx.started();
    while (!abort.load(std::memory_order_relaxed)) {
      const detail::AbsorbResult in = detail::absorb_intermediate(ib, hs, scratch);
      const bool draining = ib.drained();
      if (hs.empty()) {
        if (draining) break;
        continue;
      }
      if (hs.size() < ctx.fill_trigger() && !in.ib_emptied && !draining) continue;

      const JoinKey index_key = *hs.oldest_key();
      const auto t0 = Clock::now();
      ctx.store().read_partition(index_key, ctx.budget().d_b, partition);
      const auto t1 = Clock::now();
      const DpResult dp = state.dp_step(partition, dp_sink);
      report.orphan_count += state.orphan_check(index_key, draining);
      const auto t2 = Clock::now();

      IterationStats it;
      it.omega_n = sp.hits.exchange(0, std::memory_order_relaxed);
      it.sp_ns = sp.busy_ns.exchange(0, std::memory_order_relaxed);
      it.omega_s = dp.matched;
      it.load_ns = elapsed_ns(t0, t1);
      it.stall_ns = it.load_ns;  // the load is synchronous
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
  };

  ctx.start_clock();
  {
    detail::Supervisor sup([&] {
      abort.store(true);
      ib.shutdown();
    });
    sup.spawn("stream-probing worker", "cj-stream",
              [&] { detail::run_sp_worker(ctx, state, ib, sp_sink, sp, abort); });
    sup.spawn("disk-probing worker", "cj-disk", dp_worker);
    sup.join(0, config.shutdown_timeout, [&] {
      std::ostringstream d;
      d << "H_S holds " << hs.size() << " records, I_B holds " << ib.size();
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
