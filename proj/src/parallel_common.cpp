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

// Pieces shared by the two parallel engines: the worker supervisor and the
// stream-probing worker.

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <sstream>

#include "cachejoin/error.hpp"
#include "cachejoin/intermediate_buffer.hpp"
#include "engine_internal.hpp"

namespace cachejoin::detail {

Supervisor::~Supervisor() {
  // Only reached with live threads when join() was never called or threw
  // before joining everyone.
  abort_once();
  for (auto& w : workers_) {
    if (w->thread.joinable()) w->thread.join();
  }
}

void Supervisor::abort_once() {
  {
    std::lock_guard lock(mu_);
    if (aborted_) return;
    aborted_ = true;
  }
  abort_all_();
}

void Supervisor::spawn(std::string name, const char* thread_name, std::function<void()> body) {
  auto worker = std::make_unique<Worker>();
  worker->name = std::move(name);
  Worker* w = worker.get();
  workers_.push_back(std::move(worker));
  w->thread = std::thread([this, w, thread_name, body = std::move(body)] {
    pthread_setname_np(pthread_self(), thread_name);
    bool failed = false;
    try {
      body();
    } catch (...) {
      failed = true;
      std::lock_guard lock(mu_);
      if (!failure_) failure_ = std::current_exception();
    }
    if (failed) abort_once();
    {
      std::lock_guard lock(mu_);
      w->done = true;
    }
    cv_.notify_all();
  });
}

void Supervisor::join(std::size_t primary, std::chrono::milliseconds timeout,
                      const std::function<std::string()>& diagnose) {
  workers_.at(primary)->thread.join();

  std::vector<std::string> stuck;
  {
    std::unique_lock lock(mu_);
    const bool all_done = cv_.wait_for(lock, timeout, [&] {
      return std::all_of(workers_.begin(), workers_.end(),
                         [](const auto& w) { return w->done; });
    });
    if (!all_done) {
      for (const auto& w : workers_) {
        if (!w->done) stuck.push_back(w->name);
      }
    }
  }
  std::string diagnostic;
  if (!stuck.empty()) {
    diagnostic = diagnose();
    abort_once();
  }
  for (auto& w : workers_) {
    if (w->thread.joinable()) w->thread.join();
  }
  if (failure_) std::rethrow_exception(failure_);
  if (!stuck.empty()) {
    std::ostringstream msg;
    msg << "workers did not finish within " << timeout.count() << " ms of the "
        << workers_[primary]->name << ":";
    for (const auto& s : stuck) msg << ' ' << s;
    msg << " (" << diagnostic << ')';
    fail(ErrorCode::kTimeout, msg.str());
  }
}

void yield_on_wakeup() noexcept {
  // Best effort: without this, freeing I_B space lets the woken SP worker
  // preempt the DP worker before it has issued its read, and the read then
  // overlaps nothing.
  sched_param param{};
  param.sched_priority = 0;
  pthread_setschedparam(pthread_self(), SCHED_BATCH, &param);
}

void run_sp_worker(RunContext& ctx, JoinState& state, IntermediateBuffer& ib, OutputSink& sink,
                   SpCounters& counters, const std::atomic<bool>& abort) {
  if (ctx.config().batch_stream_worker) yield_on_wakeup();
  StreamBuffer& sb = ctx.stream_buffer();
  std::vector<StreamRecord> batch;
  std::vector<StreamRecord> misses;
  batch.reserve(kSpChunk);
  misses.reserve(kSpChunk);
  std::uint64_t consumed = 0;

  while (!abort.load(std::memory_order_relaxed)) {
    const auto t0 = Clock::now();
    if (ctx.should_stop(consumed, t0)) break;
    const std::size_t k =
        static_cast<std::size_t>(std::min<std::uint64_t>(kSpChunk, ctx.remaining(consumed)));
    batch.clear();
    misses.clear();
    const std::size_t got = sb.take(k, batch);
    if (got == 0) break;
    consumed += got;
    const std::size_t hits = state.sp_step(batch, sink, misses);
    counters.hits.fetch_add(hits, std::memory_order_relaxed);
    counters.lookups.fetch_add(got, std::memory_order_relaxed);
    counters.consumed.store(consumed, std::memory_order_relaxed);
    // Blocking on a full I_B is not SP work.
    counters.busy_ns.fetch_add(elapsed_ns(t0, Clock::now()), std::memory_order_relaxed);
    if (!ib.push_batch(misses)) break;
    if (got < k) break;
  }
  ib.shutdown();
}

AbsorbResult absorb_intermediate(IntermediateBuffer& ib, StreamStore& hs,
                                 std::vector<StreamRecord>& scratch) {
  AbsorbResult res;
  const std::size_t room = hs.free_slots();
  if (room == 0) return res;
  scratch.clear();
  res.moved = ib.pop_batch(scratch, room, hs.empty());
  for (const StreamRecord& r : scratch) {
    if (!hs.insert(r)) fail(ErrorCode::kInternal, "H_S rejected a record it had room for");
  }
  res.ib_emptied = res.moved < room;
  return res;
}

}  // namespace cachejoin::detail
