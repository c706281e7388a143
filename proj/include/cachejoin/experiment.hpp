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

// Experiment harness: a flat key=value experiment description, single runs
// with repetitions, one-axis sweeps, their CSV form and plots.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cachejoin/engine.hpp"

namespace cachejoin {

struct ExperimentConfig {
  EngineKind engine = EngineKind::kCacheJoin;
  // Engines a sweep runs; empty means all three.
  std::vector<EngineKind> engines;

  // Either an existing master file or a generated one, cached in work_dir.
  std::optional<std::filesystem::path> master;
  std::uint64_t r_size = 100000;
  std::uint64_t master_seed = 42;
  std::filesystem::path work_dir = "cachejoin-data";
  ReadMode read_mode = ReadMode::kDirect;

  std::uint64_t memory_bytes = 20u << 20;
  std::uint64_t d_b = kDefaultDiskBufferRecords;
  std::uint64_t h_r = kDefaultCacheRecords;
  std::uint64_t i_b_bytes = kDefaultIntermediateBytes;
  std::optional<double> alpha;  // empty: AUTO
  std::uint32_t fudge = kDefaultFudge;
  std::uint64_t threshold = 2;
  bool accumulate_frequency = false;
  bool orphan_policy = true;
  std::optional<std::uint64_t> fill_trigger;
  std::size_t stream_buffer_bytes = kDefaultStreamBufferBytes;

  double zipf = 1.0;
  double orphan_rate = 0.0;
  RankToKey rank_to_key = RankToKey::kIdentity;
  std::uint64_t seed = 1;
  // Replayed instead of generating when set.
  std::optional<std::filesystem::path> replay;
  std::uint64_t stream_records = 500000;
  std::optional<double> duration_s;
  std::uint64_t warmup = 100;
  std::uint32_t reps = 3;
  double shutdown_timeout_s = 60;
};

// R = 100k, M = 20 MB, 500k stream records.
ExperimentConfig desk_preset();
// R = 1M, M = 100 MB, 2M stream records, d_B = 850, i_B = 2 MB.
ExperimentConfig full_preset();

// Applies one key=value setting; throws kParse for an unknown key or a bad
// value, and kInvalidArgument for a value out of range.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
// Reads settings on top of `base`. A `preset=` line resets to that preset.
ExperimentConfig read_experiment(std::istream& in, ExperimentConfig base = {},
                                 std::string_view source = "config");
ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base = {});
// Every setting, in a form read_experiment accepts.
void write_experiment(std::ostream& out, const ExperimentConfig& config);
// Throws kInvalidArgument for an inconsistent configuration.
void validate(const ExperimentConfig& config);

// The master file for this configuration: `master` if set, otherwise a
// generated file in work_dir, created on first use and reused afterwards.
std::filesystem::path ensure_master(const ExperimentConfig& config);

// Engine settings for one run (the master path must already be resolved).
EngineConfig to_engine_config(const ExperimentConfig& config, EngineKind engine,
                              const std::filesystem::path& master_path);

// Aggregate of the repetitions of one engine at one sweep point.
struct CellResult {
  std::string axis_value;
  EngineKind engine = EngineKind::kCacheJoin;
  std::uint32_t reps = 0;
  double mu_mean = 0;
  double mu_std = 0;  // sample standard deviation
  double omega_n_mean = 0;
  double omega_s_mean = 0;
  double c_loop_mean_s = 0;
  double cache_hit_ratio = 0;
  double dp_stall_ns = 0;
  double orphans = 0;  // mean per repetition
  // Not in the CSV.
  double load_ns = 0;
  std::uint64_t included_iterations = 0;  // minimum over repetitions
  std::optional<std::string> error;
};

CellResult aggregate(std::string axis_value, EngineKind engine,
                     const std::vector<RunReport>& reports);

enum class SweepAxis { kRSize, kMemory, kSkew, kIb };

const char* sweep_axis_name(SweepAxis axis) noexcept;
std::optional<SweepAxis> parse_sweep_axis(std::string_view name) noexcept;
// Default sweep points; memory and i_B are in MB, R in records.
std::vector<double> default_sweep_values(SweepAxis axis);
// The configuration of one sweep point.
ExperimentConfig at_sweep_point(const ExperimentConfig& base, SweepAxis axis, double value);
std::string format_axis_value(SweepAxis axis, double value);

struct SweepResult {
  std::string axis;
  // Settings shared by every row, one key=value per entry.
  std::vector<std::string> fixed;
  std::vector<CellResult> rows;
};

struct ProgressEvent {
  std::string axis_value;
  EngineKind engine;
  std::uint32_t rep;
  const RunReport* report;        // null when the run failed
  const std::string* error;       // set when the run failed
};
using ProgressFn = std::function<void(const ProgressEvent&)>;

// Runs every engine `reps` times at every point, interleaving engines
// within each repetition so slow drift hits all engines alike. A failing
// cell becomes an error row and the sweep continues.
SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const ProgressFn& progress = {});

// Repetitions of the engines at one configuration, interleaved the same way.
std::vector<CellResult> run_engines(const ExperimentConfig& config,
                                    const std::vector<EngineKind>& engines,
                                    const std::string& axis_value,
                                    const ProgressFn& progress = {},
                                    std::vector<std::vector<RunReport>>* reports = nullptr);

inline constexpr std::string_view kCsvHeader =
    "axis_value,engine,reps,mu_mean,mu_std,omega_n_mean,omega_s_mean,c_loop_mean_s,"
    "cache_hit_ratio,dp_stall_ns,orphans";

// Comment lines carry the axis and the fixed settings; error rows become
// comments so every data cell stays numeric.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
// Throws kParse with the line number for malformed input.
SweepResult read_sweep_csv(std::istream& in);
void write_csv_row(std::ostream& out, const CellResult& row);

// Whitespace table: axis value, then mean and std of mu per engine.
void write_plot_data(std::ostream& out, const SweepResult& result);
// Self-contained SVG line chart of mu against the axis, one series per engine.
void write_plot_svg(std::ostream& out, const SweepResult& result);
// Writes <stem>.dat and <stem>.svg next to each other; returns both paths.
std::vector<std::filesystem::path> write_plots(const SweepResult& result,
                                               const std::filesystem::path& stem);

// Spearman rank correlation, average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cachejoin
