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

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <functional>
#include <ostream>
#include <ranges>
#include <string_view>
#include <unordered_map>

#include "cachejoin/engine.hpp"
#include "cachejoin/error.hpp"
#include "engine_internal.hpp"
#include "kv_text.hpp"

namespace cachejoin {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kStorage: return "storage error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kCorruption: return "corruption error";
    case ErrorCode::kCapacity: return "capacity error";
    case ErrorCode::kEmptyRelation: return "empty relation";
    case ErrorCode::kInsufficientMemory: return "insufficient memory";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kContractViolation: return "contract violation";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

const char* engine_name(EngineKind kind) noexcept {
  switch (kind) {
    case EngineKind::kCacheJoin: return "cachejoin";
    case EngineKind::kPCacheJoin: return "pcachejoin";
    case EngineKind::kOpCacheJoin: return "opcachejoin";
  }
  return "?";
}

std::optional<EngineKind> parse_engine(std::string_view name) noexcept {
  if (name == "cachejoin") return EngineKind::kCacheJoin;
  if (name == "pcachejoin") return EngineKind::kPCacheJoin;
  if (name == "opcachejoin") return EngineKind::kOpCacheJoin;
  return std::nullopt;
}

std::uint64_t joined_record_digest(const JoinedRecord& rec) noexcept {
  return std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(rec.bytes.data()), rec.bytes.size()));
}

FileSink::FileSink(const std::filesystem::path& path) : path_(path) {
  f_ = std::fopen(path.c_str(), "wb");
  if (f_ == nullptr) {
    fail(ErrorCode::kStorage,
         "cannot create output sink '" + path.string() + "': " + std::strerror(errno));
  }
}

FileSink::~FileSink() {
  if (f_ != nullptr) std::fclose(f_);
}

void FileSink::append(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(mu_);
  if (std::fwrite(bytes.data(), 1, bytes.size(), f_) != bytes.size()) {
    fail(ErrorCode::kStorage, "write failed for output sink '" + path_.string() + "'");
  }
}

namespace {
constexpr std::size_t kSinkFlushBytes = 1 << 16;
}

OutputSink::OutputSink(bool collect, FileSink* file) : collect_(collect), file_(file) {
  if (file_ != nullptr) pending_.reserve(kSinkFlushBytes + kJoinedRecordSize);
}

OutputSink::OutputSink(OutputSink&& other) noexcept
    : collect_(other.collect_),
      file_(std::exchange(other.file_, nullptr)),
      count_(other.count_),
      checksum_(other.checksum_),
      collected_(std::move(other.collected_)),
      pending_(std::move(other.pending_)) {}

OutputSink::~OutputSink() {
  try {
    flush();
  } catch (...) {
  }
}

void OutputSink::emit(const StreamRecord& s, const std::uint8_t* master_payload) {
  JoinedRecord rec(s, master_payload);
  checksum_ += joined_record_digest(rec);
  ++count_;
  if (collect_) collected_.push_back(rec);
  if (file_ != nullptr) {
    pending_.insert(pending_.end(), rec.bytes.begin(), rec.bytes.end());
    if (pending_.size() >= kSinkFlushBytes) flush();
  }
}

void OutputSink::flush() {
  if (file_ != nullptr && !pending_.empty()) {
    file_->append(pending_);
    pending_.clear();
  }
}

JoinState::JoinState(std::size_t stream_capacity, std::size_t cache_capacity,
                     JoinOptions options)
    : hs_(stream_capacity), cache_(cache_capacity), options_(options) {}

std::size_t JoinState::sp_step(std::span<const StreamRecord> batch, OutputSink& sink,
                               std::vector<StreamRecord>& misses) {
  std::size_t hits = 0;
  cache_.lookup_each(
      batch | std::views::transform([](const StreamRecord& r) { return r.fkey; }),
      [&](std::size_t i, const MasterRecord& m) {
        sink.emit(batch[i], m.payload.data());
        ++hits;
      },
      [&](std::size_t i) { misses.push_back(batch[i]); });
  return hits;
}

DpResult JoinState::dp_step(const Partition& partition, OutputSink& sink) {
  DpResult res;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const JoinKey key = partition.key(i);
    const std::uint8_t* payload = partition.payload(i);
    const std::size_t n = hs_.match_and_evict(
        key, [&](const StreamRecord& s) { sink.emit(s, payload); });
    if (n == 0) continue;
    res.matched += n;
    std::uint64_t freq = n;
    if (options_.accumulate_frequency) {
      auto& acc = accumulated_[key];
      acc += n;
      freq = acc;
    }
    if (freq > options_.threshold) {
      cache_.promote(partition.record(i), freq);
      ++res.promotions;
      if (options_.accumulate_frequency) accumulated_.erase(key);
    }
  }
  return res;
}

std::size_t JoinState::orphan_check(JoinKey index_key, bool drop_now) {
  if (!hs_.contains(index_key)) return 0;
  if (!options_.orphan_policy && !drop_now) return 0;
  const std::uint32_t marks = hs_.mark_orphan(index_key);
  if (marks < 2 && !drop_now) return 0;
  return hs_.match_and_evict(index_key, [](const StreamRecord&) {});
}

void RunReport::summarize() {
  included_iterations = 0;
  double sum_out = 0, sum_loop = 0, sum_n = 0, sum_s = 0, sum_load = 0, sum_stall = 0,
         sum_dp = 0, sum_sp = 0;
  for (const auto& it : iterations) {
    if (!it.included()) continue;
    ++included_iterations;
    sum_n += double(it.omega_n);
    sum_s += double(it.omega_s);
    sum_out += double(it.omega_n + it.omega_s);
    sum_loop += double(it.loop_ns);
    sum_load += double(it.load_ns);
    sum_stall += double(it.stall_ns);
    sum_dp += double(it.dp_ns);
    sum_sp += double(it.sp_ns);
  }
  if (included_iterations == 0) {
    mu = mean_omega_n = mean_omega_s = mean_c_loop_s = 0.0;
    mean_load_ns = mean_stall_ns = mean_dp_ns = mean_sp_ns = 0.0;
    return;
  }
  const double n = double(included_iterations);
  mu = sum_loop > 0 ? sum_out / (sum_loop * 1e-9) : 0.0;
  mean_omega_n = sum_n / n;
  mean_omega_s = sum_s / n;
  mean_c_loop_s = sum_loop * 1e-9 / n;
  mean_load_ns = sum_load / n;
  mean_stall_ns = sum_stall / n;
  mean_dp_ns = sum_dp / n;
  mean_sp_ns = sum_sp / n;
}

std::vector<JoinedRecord> oracle_join(const std::filesystem::path& master_path,
                                      std::span<const StreamRecord> stream) {
  // A plain full scan into a hash map, independent of partition reads.
  const MasterStore store = MasterStore::open(master_path, ReadMode::kBuffered);
  std::unordered_map<JoinKey, MasterRecord> by_key;
  for (const auto& r : store.read_all()) by_key.emplace(r.key, r);
  std::vector<JoinedRecord> out;
  out.reserve(stream.size());
  for (const auto& s : stream) {
    auto it = by_key.find(s.fkey);
    if (it != by_key.end()) out.emplace_back(s, it->second.payload.data());
  }
  return out;
}

void write_report(std::ostream& out, const RunReport& r) {
  const auto precision = out.precision(12);
  out << "engine=" << engine_name(r.engine) << '\n'
      << "memory_bytes=" << r.budget.total_bytes << '\n'
      << "d_b=" << r.budget.d_b << '\n'
      << "disk_buffers=" << r.budget.n_disk_buffers << '\n'
      << "h_r=" << r.budget.h_r << '\n'
      << "i_b=" << r.budget.i_b << '\n'
      << "h_s=" << r.budget.h_s << '\n'
      << "q_cap=" << r.budget.q_cap << '\n'
      << "alpha=" << r.budget.alpha << '\n'
      << "stream_consumed=" << r.stream_consumed << '\n'
      << "output_count=" << r.output_count << '\n'
      << "output_checksum=" << r.output_checksum << '\n'
      << "orphans=" << r.orphan_count << '\n'
      << "cache_lookups=" << r.cache_lookups << '\n'
      << "cache_hits=" << r.cache_hits << '\n'
      << "cache_hit_ratio=" << r.cache_hit_ratio() << '\n'
      << "promotions=" << r.promotions << '\n'
      << "structure_violations=" << r.structure_violations << '\n'
      << "iterations=" << r.iterations.size() << '\n'
      << "included_iterations=" << r.included_iterations << '\n'
      << "mu=" << r.mu << '\n'
      << "mean_omega_n=" << r.mean_omega_n << '\n'
      << "mean_omega_s=" << r.mean_omega_s << '\n'
      << "mean_c_loop_s=" << r.mean_c_loop_s << '\n'
      << "mean_load_ns=" << r.mean_load_ns << '\n'
      << "mean_stall_ns=" << r.mean_stall_ns << '\n'
      << "mean_dp_ns=" << r.mean_dp_ns << '\n'
      << "mean_sp_ns=" << r.mean_sp_ns << '\n'
      << "wall_seconds=" << r.wall_seconds << '\n';
  for (const auto& w : r.warnings) out << "# warning: " << w << '\n';
  out.precision(precision);
}

RunReport read_report(std::istream& in, std::string_view source) {
  using detail::parse_double;
  using detail::parse_u64;
  RunReport r;
  bool have_engine = false;
  for (const auto& e : detail::parse_kv(in, source)) {
    const std::string_view k = e.key;
    const std::string_view v = e.value;
    try {
      if (k == "engine") {
        const auto kind = parse_engine(v);
        if (!kind) fail(ErrorCode::kParse, "unknown engine '" + std::string(v) + "'");
        r.engine = *kind;
        have_engine = true;
      } else if (k == "memory_bytes") {
        r.budget.total_bytes = parse_u64(v, k);
      } else if (k == "d_b") {
        r.budget.d_b = parse_u64(v, k);
      } else if (k == "disk_buffers") {
        r.budget.n_disk_buffers = static_cast<std::uint32_t>(parse_u64(v, k));
      } else if (k == "h_r") {
        r.budget.h_r = parse_u64(v, k);
      } else if (k == "i_b") {
        r.budget.i_b = parse_u64(v, k);
      } else if (k == "h_s") {
        r.budget.h_s = parse_u64(v, k);
      } else if (k == "q_cap") {
        r.budget.q_cap = parse_u64(v, k);
      } else if (k == "alpha") {
        r.budget.alpha = parse_double(v, k);
      } else if (k == "stream_consumed") {
        r.stream_consumed = parse_u64(v, k);
      } else if (k == "output_count") {
        r.output_count = parse_u64(v, k);
      } else if (k == "output_checksum") {
        r.output_checksum = parse_u64(v, k);
      } else if (k == "orphans") {
        r.orphan_count = parse_u64(v, k);
      } else if (k == "cache_lookups") {
        r.cache_lookups = parse_u64(v, k);
      } else if (k == "cache_hits") {
        r.cache_hits = parse_u64(v, k);
      } else if (k == "promotions") {
        r.promotions = parse_u64(v, k);
      } else if (k == "structure_violations") {
        r.structure_violations = parse_u64(v, k);
      } else if (k == "included_iterations") {
        r.included_iterations = parse_u64(v, k);
      } else if (k == "mu") {
        r.mu = parse_double(v, k);
      } else if (k == "mean_omega_n") {
        r.mean_omega_n = parse_double(v, k);
      } else if (k == "mean_omega_s") {
        r.mean_omega_s = parse_double(v, k);
      } else if (k == "mean_c_loop_s") {
        r.mean_c_loop_s = parse_double(v, k);
      } else if (k == "mean_load_ns") {
        r.mean_load_ns = parse_double(v, k);
      } else if (k == "mean_stall_ns") {
        r.mean_stall_ns = parse_double(v, k);
      } else if (k == "mean_dp_ns") {
        r.mean_dp_ns = parse_double(v, k);
      } else if (k == "mean_sp_ns") {
        r.mean_sp_ns = parse_double(v, k);
      } else if (k == "wall_seconds") {
        r.wall_seconds = parse_double(v, k);
      } else if (k == "iterations" || k == "cache_hit_ratio") {
        parse_double(v, k);  // derived; recomputed from the fields above
      } else {
        fail(ErrorCode::kParse, "unknown key '" + std::string(k) + "'");
      }
    } catch (const Error& err) {
      fail(ErrorCode::kParse,
           std::string(source) + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  if (!have_engine) fail(ErrorCode::kParse, std::string(source) + ": missing key 'engine'");
  return r;
}

void write_iteration_log(std::ostream& out, const RunReport& r) {
  out << "ordinal,omega_n,omega_s,sp_ns,dp_ns,load_ns,stall_ns,loop_ns,hs_size,warmup,"
         "draining\n";
  for (const auto& it : r.iterations) {
    out << it.ordinal << ',' << it.omega_n << ',' << it.omega_s << ',' << it.sp_ns << ','
        << it.dp_ns << ',' << it.load_ns << ',' << it.stall_ns << ',' << it.loop_ns << ','
        << it.hs_size << ',' << (it.warmup ? 1 : 0) << ',' << (it.draining ? 1 : 0) << '\n';
  }
}

RunReport run_engine(const EngineConfig& config) {
  switch (config.engine) {
    case EngineKind::kCacheJoin: return run_cachejoin(config);
    case EngineKind::kPCacheJoin: return run_pcachejoin(config);
    case EngineKind::kOpCacheJoin: return run_opcachejoin(config);
  }
  fail(ErrorCode::kInvalidArgument, "unknown engine");
}

}  // namespace cachejoin
