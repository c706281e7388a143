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

// Analytical cost model of one outer-loop iteration, calibration of its
// per-primitive constants on the host, and prediction-vs-measurement
// comparison.
//
// One iteration of the parallel engines is modelled as
//
//   c_loop = 1e-9 * [ IO + d_B (c_H + c_F)
//                     + w_S (c_O + c_S + c_A + c_E + c_Ab)
//                     + w_N (c_H + c_O + c_S) ]        seconds
//
// with IO = c_io(d_B) for P-CACHEJOIN and c_io(d_B) / 2 for OP-CACHEJOIN,
// and the service rate is mu = (w_N + w_S) / c_loop.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cachejoin/engine.hpp"
#include "cachejoin/master_store.hpp"
#include "cachejoin/memory_budget.hpp"

namespace cachejoin {

enum class CostVariant { kP, kOP };

const char* cost_variant_name(CostVariant v) noexcept;
std::optional<CostVariant> parse_cost_variant(std::string_view name) noexcept;
// The variant modelling an engine; CACHEJOIN is costed like P.
CostVariant cost_variant_for(EngineKind engine) noexcept;

// Per-primitive costs in nanoseconds.
struct CostConstants {
  std::map<std::uint64_t, double> c_io;  // d_B -> time to load d_B records
  double c_h = 0;   // hash-table probe, per record
  double c_o = 0;   // output a joined record
  double c_e = 0;   // delete a record from H_S and Q
  double c_s = 0;   // read a record from the stream buffer
  double c_a = 0;   // append a record to H_S and Q
  double c_f = 0;   // threshold comparison
  double c_ab = 0;  // append a record to I_B

  // Load cost for d_b records: the calibrated value, or a linear
  // interpolation/extrapolation through the calibrated points.
  // Throws kDomain when nothing was calibrated.
  double io_for(std::uint64_t d_b) const;
};

struct CostPrediction {
  double c_loop = 0;  // seconds
  double mu = 0;      // records per second
  // Breakdown of c_loop in seconds; the four terms sum to c_loop.
  double io_term = 0;
  double probe_term = 0;   // d_B (c_H + c_F)
  double stream_term = 0;  // w_S (c_O + c_S + c_A + c_E + c_Ab)
  double cache_term = 0;   // w_N (c_H + c_O + c_S)
};

// Throws kDomain for negative or non-finite inputs.
CostPrediction predict_c_loop(const CostConstants& k, std::uint64_t d_b, double omega_n,
                              double omega_s, CostVariant variant);
// Throws kDomain when c_loop is not positive.
double predict_mu(double omega_n, double omega_s, double c_loop);

// Analytical memory split, without rounding to whole records.
struct MemoryPrediction {
  double disk_buffer_bytes = 0;
  double cache_bytes = 0;
  double intermediate_bytes = 0;
  double stream_store_bytes = 0;
  double queue_bytes = 0;
  double slack_bytes = 0;  // M minus the sum of whole-record components
  double total_bytes = 0;  // sum of the five terms; equals M
};

// The disk-buffer term counts one buffer for P and two for OP, whatever
// request.n_disk_buffers says. Same errors as plan_budget.
MemoryPrediction predict_memory(const BudgetRequest& request, CostVariant variant);

struct CalibrationOptions {
  std::filesystem::path master_path;
  ReadMode read_mode = ReadMode::kDirect;
  std::vector<std::uint64_t> d_b_values{kDefaultDiskBufferRecords};
  // Timed trials per primitive; the median is kept.
  std::size_t trials = 31;
  // Operations per trial for the per-record primitives. Zero sizes each
  // trial like one loop iteration: d_B for the partition-probe primitives,
  // `stream_batch` for the stream-record ones.
  std::size_t batch = 0;
  std::size_t stream_batch = 64;
  // Start every trial from cold caches by sweeping this many bytes first,
  // as the alternating phases of the join loop do; zero keeps caches warm.
  std::size_t eviction_bytes = 64u << 20;
  // Resident stream records the hash-table primitives run against, so that
  // probes see a realistically large table.
  std::size_t stream_capacity = 100000;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 1;
};

struct Calibration {
  CostConstants constants;
  double clock_resolution_ns = 0;
  std::vector<std::string> warnings;
};

// Must run with no concurrent engine activity. Throws kInvalidArgument for
// fewer than 30 trials or an empty d_B list.
Calibration calibrate(const CalibrationOptions& options);

struct CostComparison {
  double predicted_c_loop = 0;
  double measured_c_loop = 0;
  double predicted_mu = 0;
  double measured_mu = 0;
  // |predicted - measured| / measured; infinite when the measurement is 0.
  double c_loop_error = 0;
  double mu_error = 0;
};

double relative_error(double predicted, double measured) noexcept;
CostComparison compare(const CostPrediction& prediction, double measured_c_loop,
                       double measured_mu);
CostComparison compare(const CostPrediction& prediction, const RunReport& report);

// key=value text. Loading rejects unknown keys, missing constants and
// negative values (kParse).
void write_constants(std::ostream& out, const CostConstants& k);
CostConstants read_constants(std::istream& in);
void save_constants(const std::filesystem::path& path, const CostConstants& k);
CostConstants load_constants(const std::filesystem::path& path);

void write_prediction(std::ostream& out, const CostPrediction& p);
CostPrediction read_prediction(std::istream& in);

}  // namespace cachejoin
