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

// Setup and bookkeeping shared by the three engines.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cachejoin/engine.hpp"
#include "cachejoin/intermediate_buffer.hpp"

namespace cachejoin::detail {

using Clock = std::chrono::steady_clock;

inline std::int64_t elapsed_ns(Clock::time_point a, Clock::time_point b) noexcept {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

// Records per stream-buffer take in the SP phase.
inline constexpr std::size_t kSpChunk = 256;

// Everything an engine run needs before its clock starts: the opened
// master file, the memory plan, the stream and the output sink.
class RunContext {
 public:
  explicit RunContext(const EngineConfig& config);

  const EngineConfig& config() const noexcept { return config_; }
  const MasterStore& store() const noexcept { return store_; }
  const MemoryBudget& budget() const noexcept { return budget_; }
  StreamBuffer& stream_buffer() noexcept { return *stream_buffer_; }
  FileSink* file_sink() noexcept { return file_.get(); }
  std::uint64_t fill_trigger() const noexcept { return fill_trigger_; }
  JoinOptions join_options() const noexcept;

  void start_clock() noexcept { start_ = Clock::now(); }
  Clock::time_point started() const noexcept { return start_; }
  // Stop condition on consumed records / elapsed time.
  bool should_stop(std::uint64_t consumed, Clock::time_point now) const noexcept;
  // Records the SP phase may still take.
  std::uint64_t remaining(std::uint64_t consumed) const noexcept;

  // Appends an iteration, numbering it and flagging warmup.
  void add_iteration(RunReport& report, IterationStats stats) const;
  void finish(RunReport& report, std::vector<OutputSink*> sinks, const JoinState& state);

 private:
  EngineConfig config_;
  MasterStore store_;
  MemoryBudget budget_;
  std::unique_ptr<StreamSource> source_;
  std::unique_ptr<StreamBuffer> stream_buffer_;
  std::unique_ptr<FileSink> file_;
  std::uint64_t fill_trigger_ = 0;
  Clock::time_point start_;
};

// Owns the worker threads of a parallel engine. The first failure aborts
// every worker; a worker still running `timeout` after the primary one has
// finished is reported as stuck.
class Supervisor {
 public:
  explicit Supervisor(std::function<void()> abort_all) : abort_all_(std::move(abort_all)) {}
  ~Supervisor();

  // `thread_name` (at most 15 characters) labels the thread for debuggers.
  void spawn(std::string name, const char* thread_name, std::function<void()> body);
  // Joins worker `primary` without a deadline, then the rest within
  // `timeout`. Rethrows the first worker failure.
  void join(std::size_t primary, std::chrono::milliseconds timeout,
            const std::function<std::string()>& diagnose);

 private:
  struct Worker {
    std::string name;
    std::thread thread;
    bool done = false;
  };
  void abort_once();

  std::function<void()> abort_all_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::exception_ptr failure_;
  bool aborted_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
};

// Counters the SP worker publishes to the DP worker, which drains them into
// the iteration it is about to close.
struct SpCounters {
  std::atomic<std::uint64_t> hits{0};
  std::atomic<std::int64_t> busy_ns{0};
  std::atomic<std::uint64_t> lookups{0};
  std::atomic<std::uint64_t> consumed{0};
};

// Marks the calling thread as a batch thread: waking it never preempts the
// running thread.
void yield_on_wakeup() noexcept;

// The stream-probing worker of the parallel engines: probes chunks of the
// stream against H_R and forwards the misses to I_B until the stream stops
// or `abort` is raised. Shuts I_B down on exit.
void run_sp_worker(RunContext& ctx, JoinState& state, IntermediateBuffer& ib, OutputSink& sink,
                   SpCounters& counters, const std::atomic<bool>& abort);

struct AbsorbResult {
  std::size_t moved = 0;
  bool ib_emptied = false;  // I_B had no more records than H_S had room for
};

// Moves as many I_B records into H_S as it has room for, in FIFO order.
// Blocks for input only while H_S is empty.
AbsorbResult absorb_intermediate(IntermediateBuffer& ib, StreamStore& hs,
                                 std::vector<StreamRecord>& scratch);

}  // namespace cachejoin::detail
