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
#include <limits>
#include <string>

#include "cachejoin/error.hpp"
#include "engine_internal.hpp"

namespace cachejoin::detail {

RunContext::RunContext(const EngineConfig& config)
    : config_(config), store_(MasterStore::open(config.master_path, config.read_mode)) {
  if (store_.record_count() == 0) {
    fail(ErrorCode::kEmptyRelation,
         "master file '" + config.master_path.string() + "' holds no records");
  }
  BudgetRequest req = config.budget;
  req.n_disk_buffers = disk_buffers_for(config.engine);
  budget_ = plan_budget(req);
  if (config.engine != EngineKind::kCacheJoin && budget_.i_b == 0) {
    fail(ErrorCode::kInvalidArgument, "parallel engines need an intermediate buffer of at least one record");
  }

  const std::uint64_t cap = budget_.stream_capacity();
  fill_trigger_ = std::clamp<std::uint64_t>(config.fill_trigger.value_or(cap), 1, cap);

  if (config.stream.replay) {
    source_ = std::make_unique<ReplaySource>(config.stream.replay, false);
  } else {
    ZipfGenerator gen(config.stream.zipf, KeySpace::of(store_));
    if (config.stream.materialize) {
      auto records = std::make_shared<std::vector<StreamRecord>>(config.stream_records);
      gen.fill(*records);
      source_ = std::make_unique<ReplaySource>(std::move(records), config.duration.has_value());
    } else {
      source_ = std::make_unique<GeneratorSource>(std::move(gen));
    }
  }
  stream_buffer_ = std::make_unique<StreamBuffer>(config.stream_buffer_bytes,
                                                  StreamBufferMode::kSaturation, source_.get());
  if (config.sink_path) file_ = std::make_unique<FileSink>(*config.sink_path);
}

JoinOptions RunContext::join_options() const noexcept {
  return {config_.threshold, config_.accumulate_frequency, config_.orphan_policy};
}

bool RunContext::should_stop(std::uint64_t consumed, Clock::time_point now) const noexcept {
  if (!config_.duration && consumed >= config_.stream_records) return true;
  if (config_.duration && now - start_ >= *config_.duration) return true;
  return false;
}

std::uint64_t RunContext::remaining(std::uint64_t consumed) const noexcept {
  if (config_.duration) return std::numeric_limits<std::uint64_t>::max();
  return consumed >= config_.stream_records ? 0 : config_.stream_records - consumed;
}

void RunContext::add_iteration(RunReport& report, IterationStats stats) const {
  stats.ordinal = report.iterations.size();
  stats.warmup = stats.ordinal < config_.warmup_iterations;
  report.iterations.push_back(stats);
}

void RunContext::finish(RunReport& report, std::vector<OutputSink*> sinks,
                        const JoinState& state) {
  report.engine = config_.engine;
  report.budget = budget_;
  for (OutputSink* s : sinks) {
    s->flush();
    report.output_count += s->count();
    report.output_checksum += s->checksum();
    if (config_.collect_outputs) {
      auto& c = s->collected();
      report.outputs.insert(report.outputs.end(), c.begin(), c.end());
      c.clear();
    }
  }
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
  report.summarize();
  if (!state.stream_store().empty()) {
    report.warnings.push_back(std::to_string(state.stream_store().size()) +
                              " stream records were left unjoined at shutdown");
  }
  if (report.included_iterations < 1000) {
    report.warnings.push_back("only " + std::to_string(report.included_iterations) +
                              " post-warmup iterations were measured (fewer than 1000)");
  }
}

}  // namespace cachejoin::detail
