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

// Semi-stream join engines over a disk-resident master relation.
//
//   CACHEJOIN     one worker alternating the stream-probing (SP) phase and
//                 the disk-probing (DP) phase.
//   P-CACHEJOIN   SP and DP on separate workers, decoupled by the bounded
//                 intermediate buffer.
//   OP-CACHEJOIN  P-CACHEJOIN plus two disk buffers, each refilled by its
//                 own loader while DP probes the other.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cachejoin/frequency_cache.hpp"
#include "cachejoin/master_store.hpp"
#include "cachejoin/memory_budget.hpp"
#include "cachejoin/records.hpp"
#include "cachejoin/stream_source.hpp"
#include "cachejoin/stream_store.hpp"

namespace cachejoin {

enum class EngineKind { kCacheJoin, kPCacheJoin, kOpCacheJoin };

const char* engine_name(EngineKind kind) noexcept;
std::optional<EngineKind> parse_engine(std::string_view name) noexcept;
inline std::uint32_t disk_buffers_for(EngineKind kind) noexcept {
  return kind == EngineKind::kOpCacheJoin ? 2 : 1;
}

struct StreamConfig {
  ZipfSpec zipf;
  // Replayed verbatim when set; otherwise generated from `zipf`.
  std::shared_ptr<const std::vector<StreamRecord>> replay;
  // Generate the whole stream before the timed run instead of on the fly.
  bool materialize = true;
};

struct EngineConfig {
  EngineKind engine = EngineKind::kCacheJoin;
  std::filesystem::path master_path;
  ReadMode read_mode = ReadMode::kDirect;
  // n_disk_buffers is derived from the engine.
  BudgetRequest budget = [] {
    BudgetRequest r;
    r.total_bytes = 20u << 20;
    return r;
  }();
  std::uint64_t threshold = 2;
  bool accumulate_frequency = false;
  bool orphan_policy = true;
  // H_S occupancy that triggers a partition probe in the parallel engines.
  // Empty: the H_S capacity.
  std::optional<std::uint64_t> fill_trigger;
  std::size_t stream_buffer_bytes = kDefaultStreamBufferBytes;
  StreamConfig stream;
  // Stop after this many stream records have been consumed...
  std::uint64_t stream_records = 500000;
  // ...or after this much wall time, whichever comes first.
  std::optional<std::chrono::nanoseconds> duration;
  std::uint64_t warmup_iterations = 100;

  bool collect_outputs = false;
  std::optional<std::filesystem::path> sink_path;
  // Full H_S/Q linkage walk at every iteration boundary (slow).
  bool deep_structure_checks = false;
  std::chrono::milliseconds shutdown_timeout{60000};
  // Run the SP worker of the parallel engines as a batch thread, so that
  // waking it does not preempt the disk-probing worker.
  bool batch_stream_worker = true;
};

struct IterationStats {
  std::uint64_t ordinal = 0;
  std::uint64_t omega_n = 0;  // matched through the cache
  std::uint64_t omega_s = 0;  // matched through a disk partition
  std::int64_t sp_ns = 0;
  std::int64_t dp_ns = 0;     // probing the partition
  std::int64_t load_ns = 0;   // filling the disk buffer that was probed
  std::int64_t stall_ns = 0;  // DP waiting for a loaded buffer
  std::int64_t loop_ns = 0;   // c_loop
  std::uint64_t hs_size = 0;  // at the boundary
  bool warmup = false;
  bool draining = false;      // after the stream stopped

  bool included() const noexcept { return !warmup && !draining; }
};

struct RunReport {
  EngineKind engine = EngineKind::kCacheJoin;
  MemoryBudget budget;
  std::uint64_t stream_consumed = 0;
  std::uint64_t output_count = 0;
  std::uint64_t output_checksum = 0;  // order-independent multiset hash
  std::uint64_t orphan_count = 0;
  std::uint64_t cache_lookups = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t promotions = 0;
  std::uint64_t structure_violations = 0;
  double wall_seconds = 0.0;

  std::vector<IterationStats> iterations;
  std::uint64_t included_iterations = 0;
  // Over included iterations.
  double mu = 0.0;
  double mean_omega_n = 0.0;
  double mean_omega_s = 0.0;
  double mean_c_loop_s = 0.0;
  double mean_load_ns = 0.0;
  double mean_stall_ns = 0.0;
  double mean_dp_ns = 0.0;
  double mean_sp_ns = 0.0;

  std::vector<JoinedRecord> outputs;  // only with collect_outputs
  std::vector<std::string> warnings;

  double cache_hit_ratio() const noexcept {
    return cache_lookups == 0 ? 0.0 : double(cache_hits) / double(cache_lookups);
  }
  // Recomputes the aggregates from `iterations`.
  void summarize();
};

// Order-independent digest of one joined record; summed over a run.
std::uint64_t joined_record_digest(const JoinedRecord& rec) noexcept;

class FileSink;

// Per-worker output channel. Building the joined record and hashing it is
// the real output cost; nothing is skipped when results are not collected.
class OutputSink {
 public:
  OutputSink(bool collect, FileSink* file);
  ~OutputSink();
  OutputSink(OutputSink&&) noexcept;
  OutputSink& operator=(OutputSink&&) = delete;

  void emit(const StreamRecord& s, const std::uint8_t* master_payload);
  void flush();

  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t checksum() const noexcept { return checksum_; }
  std::vector<JoinedRecord>& collected() noexcept { return collected_; }

 private:
  bool collect_;
  FileSink* file_;
  std::uint64_t count_ = 0;
  std::uint64_t checksum_ = 0;
  std::vector<JoinedRecord> collected_;
  std::vector<std::uint8_t> pending_;
};

class FileSink {
 public:
  explicit FileSink(const std::filesystem::path& path);
  ~FileSink();
  void append(std::span<const std::uint8_t> bytes);

 private:
  std::mutex mu_;
  std::FILE* f_ = nullptr;
  std::filesystem::path path_;
};

struct DpResult {
  std::uint64_t matched = 0;
  std::uint64_t promotions = 0;
};

struct JoinOptions {
  std::uint64_t threshold = 2;
  bool accumulate_frequency = false;
  bool orphan_policy = true;
};

// The in-memory join state every engine drives: H_S + Q and H_R.
class JoinState {
 public:
  JoinState(std::size_t stream_capacity, std::size_t cache_capacity, JoinOptions options);

  StreamStore& stream_store() noexcept { return hs_; }
  const StreamStore& stream_store() const noexcept { return hs_; }
  FrequencyCache& cache() noexcept { return cache_; }
  const JoinOptions& options() const noexcept { return options_; }

  // Probes each record against the cache once. Hits are emitted; misses are
  // appended to `misses` in input order. Returns the hit count.
  std::size_t sp_step(std::span<const StreamRecord> batch, OutputSink& sink,
                      std::vector<StreamRecord>& misses);

  // Probes every partition record against H_S, emitting and evicting
  // matches and promoting records matched more than `threshold` times.
  DpResult dp_step(const Partition& partition, OutputSink& sink);

  // After probing a partition indexed by `index_key`: a key still resident
  // is absent from the master relation. The second such event drops its
  // records (or the first, when `drop_now`). Returns records dropped.
  std::size_t orphan_check(JoinKey index_key, bool drop_now = false);

 private:
  StreamStore hs_;
  FrequencyCache cache_;
  JoinOptions options_;
  std::unordered_map<JoinKey, std::uint64_t> accumulated_;
};

RunReport run_engine(const EngineConfig& config);
RunReport run_cachejoin(const EngineConfig& config);
RunReport run_pcachejoin(const EngineConfig& config);
RunReport run_opcachejoin(const EngineConfig& config);

// Brute-force reference: every stream record whose key is in the master
// relation, joined with its record. Orphans are omitted.
std::vector<JoinedRecord> oracle_join(const std::filesystem::path& master_path,
                                      std::span<const StreamRecord> stream);

// Structured key=value text form of a report (no per-iteration rows).
void write_report(std::ostream& out, const RunReport& report);
// Reads write_report's form back. Per-iteration data and outputs are not
// part of it. Throws kParse for unknown keys or malformed values.
RunReport read_report(std::istream& in, std::string_view source = "report");
// Per-iteration log as CSV.
void write_iteration_log(std::ostream& out, const RunReport& report);

}  // namespace cachejoin
