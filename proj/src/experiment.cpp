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

#include "cachejoin/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <system_error>

#include "cachejoin/error.hpp"
#include "kv_text.hpp"

namespace cachejoin {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

// Plain integer, or a decimal number with a K/M/G suffix (binary units,
// optionally followed by "B" or "iB").
std::uint64_t parse_size(std::string_view value, std::string_view what) {
  std::string_view v = detail::trim(value);
  double scale = 1;
  std::string_view unit;
  std::size_t digits = v.size();
  while (digits > 0 && std::isalpha(static_cast<unsigned char>(v[digits - 1]))) --digits;
  unit = v.substr(digits);
  v = v.substr(0, digits);
  if (unit.empty() || unit == "B") {
    scale = 1;
  } else {
    std::string u(unit);
    for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "K" || u == "KB" || u == "KIB") {
      scale = 1024.0;
    } else if (u == "M" || u == "MB" || u == "MIB") {
      scale = kMiB;
    } else if (u == "G" || u == "GB" || u == "GIB") {
      scale = kMiB * 1024.0;
    } else {
      fail(ErrorCode::kParse, std::string(what) + ": unknown size unit '" + std::string(unit) + "'");
    }
  }
  if (scale == 1) return detail::parse_u64(v, what);
  const double x = detail::parse_double(v, what) * scale;
  if (x < 0 || x > 1.8e19) fail(ErrorCode::kParse, std::string(what) + ": size out of range");
  return static_cast<std::uint64_t>(std::llround(x));
}

std::vector<EngineKind> parse_engine_list(std::string_view value) {
  std::vector<EngineKind> out;
  std::string_view rest = detail::trim(value);
  if (rest == "all") return {EngineKind::kCacheJoin, EngineKind::kPCacheJoin, EngineKind::kOpCacheJoin};
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = detail::trim(rest.substr(0, comma));
    const auto kind = parse_engine(item);
    if (!kind) fail(ErrorCode::kParse, "engines: unknown engine '" + std::string(item) + "'");
    if (std::find(out.begin(), out.end(), *kind) == out.end()) out.push_back(*kind);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (out.empty()) fail(ErrorCode::kParse, "engines: empty list");
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

const std::vector<EngineKind>& all_engines() {
  static const std::vector<EngineKind> kAll = {EngineKind::kCacheJoin, EngineKind::kPCacheJoin,
                                               EngineKind::kOpCacheJoin};
  return kAll;
}

}  // namespace

ExperimentConfig desk_preset() { return ExperimentConfig{}; }

ExperimentConfig full_preset() {
  ExperimentConfig c;
  c.r_size = 1000000;
  c.memory_bytes = 100u << 20;
  c.stream_records = 2000000;
  return c;
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const std::string k(detail::trim(key));
  const std::string_view v = detail::trim(value);
  if (k == "preset") {
    if (v == "desk") {
      c = desk_preset();
    } else if (v == "full") {
      c = full_preset();
    } else {
      fail(ErrorCode::kParse, "preset: expected 'desk' or 'full', got '" + std::string(v) + "'");
    }
  } else if (k == "engine") {
    const auto kind = parse_engine(v);
    if (!kind) fail(ErrorCode::kParse, "engine: unknown engine '" + std::string(v) + "'");
    c.engine = *kind;
  } else if (k == "engines") {
    c.engines = parse_engine_list(v);
  } else if (k == "master") {
    if (v.empty() || v == "generate") {
      c.master.reset();
    } else {
      c.master = std::filesystem::path(std::string(v));
    }
  } else if (k == "r_size") {
    c.r_size = parse_size(v, k);
  } else if (k == "master_seed") {
    c.master_seed = detail::parse_u64(v, k);
  } else if (k == "work_dir") {
    c.work_dir = std::string(v);
  } else if (k == "read_mode") {
    if (v == "direct") {
      c.read_mode = ReadMode::kDirect;
    } else if (v == "buffered") {
      c.read_mode = ReadMode::kBuffered;
    } else {
      fail(ErrorCode::kParse, "read_mode: expected 'direct' or 'buffered'");
    }
  } else if (k == "memory") {
    c.memory_bytes = parse_size(v, k);
  } else if (k == "d_b") {
    c.d_b = detail::parse_u64(v, k);
  } else if (k == "h_r") {
    c.h_r = detail::parse_u64(v, k);
  } else if (k == "i_b") {
    c.i_b_bytes = parse_size(v, k);
  } else if (k == "alpha") {
    if (v == "auto" || v == "AUTO") {
      c.alpha.reset();
    } else {
      c.alpha = detail::parse_double(v, k);
    }
  } else if (k == "fudge") {
    const auto f = detail::parse_u64(v, k);
    if (f > 1024) fail(ErrorCode::kInvalidArgument, "fudge must be at most 1024");
    c.fudge = static_cast<std::uint32_t>(f);
  } else if (k == "threshold") {
    c.threshold = detail::parse_u64(v, k);
  } else if (k == "accumulate_frequency") {
    c.accumulate_frequency = detail::parse_bool(v, k);
  } else if (k == "orphan_policy") {
    c.orphan_policy = detail::parse_bool(v, k);
  } else if (k == "fill_trigger") {
    if (v == "capacity") {
      c.fill_trigger.reset();
    } else {
      c.fill_trigger = detail::parse_u64(v, k);
    }
  } else if (k == "stream_buffer") {
    c.stream_buffer_bytes = parse_size(v, k);
  } else if (k == "zipf") {
    c.zipf = detail::parse_double(v, k);
  } else if (k == "orphan_rate") {
    c.orphan_rate = detail::parse_double(v, k);
  } else if (k == "rank_to_key") {
    if (v == "identity") {
      c.rank_to_key = RankToKey::kIdentity;
    } else if (v == "shuffled") {
      c.rank_to_key = RankToKey::kShuffled;
    } else {
      fail(ErrorCode::kParse, "rank_to_key: expected 'identity' or 'shuffled'");
    }
  } else if (k == "seed") {
    c.seed = detail::parse_u64(v, k);
  } else if (k == "replay") {
    if (v.empty() || v == "none") {
      c.replay.reset();
    } else {
      c.replay = std::filesystem::path(std::string(v));
    }
  } else if (k == "stream_records") {
    c.stream_records = parse_size(v, k);
  } else if (k == "duration_s") {
    if (v == "none") {
      c.duration_s.reset();
    } else {
      c.duration_s = detail::parse_double(v, k);
    }
  } else if (k == "warmup") {
    c.warmup = detail::parse_u64(v, k);
  } else if (k == "reps") {
    const auto r = detail::parse_u64(v, k);
    if (r > 1000) fail(ErrorCode::kInvalidArgument, "reps must be at most 1000");
    c.reps = static_cast<std::uint32_t>(r);
  } else if (k == "shutdown_timeout_s") {
    c.shutdown_timeout_s = detail::parse_double(v, k);
  } else {
    fail(ErrorCode::kParse, "unknown setting '" + k + "'");
  }
}

ExperimentConfig read_experiment(std::istream& in, ExperimentConfig base, std::string_view source) {
  for (const auto& e : detail::parse_kv(in, source)) {
    try {
      apply_setting(base, e.key, e.value);
    } catch (const Error& err) {
      fail(err.code(), std::string(source) + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  return base;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kStorage, "cannot open experiment file '" + path.string() + "'");
  return read_experiment(in, std::move(base), path.string());
}

void write_experiment(std::ostream& out, const ExperimentConfig& c) {
  out << "engine=" << engine_name(c.engine) << '\n';
  out << "engines=";
  const auto& engines = c.engines.empty() ? all_engines() : c.engines;
  for (std::size_t i = 0; i < engines.size(); ++i) {
    out << (i ? "," : "") << engine_name(engines[i]);
  }
  out << '\n'
      << "master=" << (c.master ? c.master->string() : std::string("generate")) << '\n'
      << "r_size=" << c.r_size << '\n'
      << "master_seed=" << c.master_seed << '\n'
      << "work_dir=" << c.work_dir.string() << '\n'
      << "read_mode=" << (c.read_mode == ReadMode::kDirect ? "direct" : "buffered") << '\n'
      << "memory=" << c.memory_bytes << '\n'
      << "d_b=" << c.d_b << '\n'
      << "h_r=" << c.h_r << '\n'
      << "i_b=" << c.i_b_bytes << '\n'
      << "alpha=" << (c.alpha ? format_double(*c.alpha) : std::string("auto")) << '\n'
      << "fudge=" << c.fudge << '\n'
      << "threshold=" << c.threshold << '\n'
      << "accumulate_frequency=" << (c.accumulate_frequency ? "true" : "false") << '\n'
      << "orphan_policy=" << (c.orphan_policy ? "true" : "false") << '\n'
      << "fill_trigger="
      << (c.fill_trigger ? std::to_string(*c.fill_trigger) : std::string("capacity")) << '\n'
      << "stream_buffer=" << c.stream_buffer_bytes << '\n'
      << "zipf=" << format_double(c.zipf) << '\n'
      << "orphan_rate=" << format_double(c.orphan_rate) << '\n'
      << "rank_to_key=" << (c.rank_to_key == RankToKey::kIdentity ? "identity" : "shuffled")
      << '\n'
      << "seed=" << c.seed << '\n'
      << "replay=" << (c.replay ? c.replay->string() : std::string("none")) << '\n'
      << "stream_records=" << c.stream_records << '\n'
      << "duration_s=" << (c.duration_s ? format_double(*c.duration_s) : std::string("none"))
      << '\n'
      << "warmup=" << c.warmup << '\n'
      << "reps=" << c.reps << '\n'
      << "shutdown_timeout_s=" << format_double(c.shutdown_timeout_s) << '\n';
}

void validate(const ExperimentConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidArgument, what); };
  if (!c.master && c.r_size == 0) bad("r_size must be positive when the master file is generated");
  if (c.memory_bytes == 0) bad("memory must be positive");
  if (c.d_b == 0) bad("d_b must be positive");
  if (c.h_r == 0) bad("h_r must be positive");
  if (c.fudge == 0) bad("fudge must be positive");
  if (c.stream_buffer_bytes < kStreamRecordSize) bad("stream_buffer must hold at least one record");
  if (c.alpha && !(*c.alpha > 0 && *c.alpha < 1)) bad("alpha must lie strictly between 0 and 1");
  if (!(c.zipf >= 0) || !std::isfinite(c.zipf)) bad("zipf must be a finite non-negative number");
  if (!(c.orphan_rate >= 0 && c.orphan_rate < 1)) bad("orphan_rate must lie in [0, 1)");
  if (c.duration_s && !(*c.duration_s > 0 && std::isfinite(*c.duration_s))) {
    bad("duration_s must be positive");
  }
  if (c.duration_s && c.stream_records == 0 && !c.replay) {
    bad("a timed run needs stream_records > 0 to size the cyclic stream");
  }
  if (c.reps == 0) bad("reps must be positive");
  if (!(c.shutdown_timeout_s > 0)) bad("shutdown_timeout_s must be positive");
  if (c.fill_trigger && *c.fill_trigger == 0) bad("fill_trigger must be positive");
  const auto& engines = c.engines.empty() ? all_engines() : c.engines;
  const bool parallel = c.engine != EngineKind::kCacheJoin ||
                        std::any_of(engines.begin(), engines.end(),
                                    [](EngineKind e) { return e != EngineKind::kCacheJoin; });
  if (parallel && c.i_b_bytes < kStreamRecordSize) {
    bad("i_b must hold at least one stream record for the parallel engines");
  }
}

std::filesystem::path ensure_master(const ExperimentConfig& c) {
  if (c.master) return *c.master;
  if (c.r_size == 0) fail(ErrorCode::kInvalidArgument, "r_size must be positive");
  std::error_code ec;
  std::filesystem::create_directories(c.work_dir, ec);
  if (ec) {
    fail(ErrorCode::kStorage,
         "cannot create work directory '" + c.work_dir.string() + "': " + ec.message());
  }
  const auto path = c.work_dir / ("master_" + std::to_string(c.r_size) + "_s" +
                                  std::to_string(c.master_seed) + ".bin");
  if (std::filesystem::exists(path, ec) &&
      std::filesystem::file_size(path, ec) == master_file_size(c.r_size) && !ec) {
    return path;
  }
  auto tmp = path;
  tmp += ".tmp";
  generate_master(tmp, c.r_size, c.master_seed);
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kStorage, "cannot move '" + tmp.string() + "' into place: " + ec.message());
  return path;
}

EngineConfig to_engine_config(const ExperimentConfig& c, EngineKind engine,
                              const std::filesystem::path& master_path) {
  EngineConfig e;
  e.engine = engine;
  e.master_path = master_path;
  e.read_mode = c.read_mode;
  e.budget.total_bytes = c.memory_bytes;
  e.budget.d_b = c.d_b;
  e.budget.h_r = c.h_r;
  e.budget.i_b_bytes = engine == EngineKind::kCacheJoin ? 0 : c.i_b_bytes;
  e.budget.alpha = c.alpha;
  e.budget.fudge = c.fudge;
  e.threshold = c.threshold;
  e.accumulate_frequency = c.accumulate_frequency;
  e.orphan_policy = c.orphan_policy;
  e.fill_trigger = c.fill_trigger;
  e.stream_buffer_bytes = c.stream_buffer_bytes;
  e.stream.zipf.exponent = c.zipf;
  e.stream.zipf.seed = c.seed;
  e.stream.zipf.rank_to_key = c.rank_to_key;
  e.stream.zipf.orphan_rate = c.orphan_rate;
  e.stream_records = c.stream_records;
  if (c.replay) {
    e.stream.replay =
        std::make_shared<const std::vector<StreamRecord>>(read_stream_file(*c.replay));
    if (!c.duration_s) e.stream_records = e.stream.replay->size();
  }
  if (c.duration_s) {
    e.duration = std::chrono::nanoseconds(static_cast<std::int64_t>(*c.duration_s * 1e9));
  }
  e.warmup_iterations = c.warmup;
  e.shutdown_timeout =
      std::chrono::milliseconds(static_cast<std::int64_t>(c.shutdown_timeout_s * 1000));
  return e;
}

CellResult aggregate(std::string axis_value, EngineKind engine,
                     const std::vector<RunReport>& reports) {
  CellResult r;
  r.axis_value = std::move(axis_value);
  r.engine = engine;
  r.reps = static_cast<std::uint32_t>(reports.size());
  if (reports.empty()) return r;
  const double n = double(reports.size());
  double hits = 0, lookups = 0;
  r.included_iterations = reports.front().included_iterations;
  for (const auto& rep : reports) {
    r.mu_mean += rep.mu / n;
    r.omega_n_mean += rep.mean_omega_n / n;
    r.omega_s_mean += rep.mean_omega_s / n;
    r.c_loop_mean_s += rep.mean_c_loop_s / n;
    r.dp_stall_ns += rep.mean_stall_ns / n;
    r.load_ns += rep.mean_load_ns / n;
    r.orphans += double(rep.orphan_count) / n;
    hits += double(rep.cache_hits);
    lookups += double(rep.cache_lookups);
    r.included_iterations = std::min(r.included_iterations, rep.included_iterations);
  }
  r.cache_hit_ratio = lookups > 0 ? hits / lookups : 0.0;
  if (reports.size() > 1) {
    double ss = 0;
    for (const auto& rep : reports) ss += (rep.mu - r.mu_mean) * (rep.mu - r.mu_mean);
    r.mu_std = std::sqrt(ss / (n - 1));
  }
  return r;
}

const char* sweep_axis_name(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::kRSize: return "rsize";
    case SweepAxis::kMemory: return "memory";
    case SweepAxis::kSkew: return "skew";
    case SweepAxis::kIb: return "ib";
  }
  return "?";
}

std::optional<SweepAxis> parse_sweep_axis(std::string_view name) noexcept {
  if (name == "rsize") return SweepAxis::kRSize;
  if (name == "memory") return SweepAxis::kMemory;
  if (name == "skew") return SweepAxis::kSkew;
  if (name == "ib") return SweepAxis::kIb;
  return std::nullopt;
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kRSize: return {500000, 1000000, 2000000};
    case SweepAxis::kMemory: return {50, 100, 150, 200, 250};
    case SweepAxis::kSkew: return {0.5, 0.75, 1.0};
    case SweepAxis::kIb: return {0.25, 0.5, 1, 2, 4, 8};
  }
  return {};
}

namespace {
const char* axis_setting(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::kRSize: return "r_size";
    case SweepAxis::kMemory: return "memory";
    case SweepAxis::kSkew: return "zipf";
    case SweepAxis::kIb: return "i_b";
  }
  return "?";
}
}  // namespace

ExperimentConfig at_sweep_point(const ExperimentConfig& base, SweepAxis axis, double value) {
  if (!std::isfinite(value) || value < 0) {
    fail(ErrorCode::kInvalidArgument, std::string("invalid ") + sweep_axis_name(axis) +
                                          " sweep value " + format_double(value));
  }
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::kRSize:
      if (base.master) fail(ErrorCode::kInvalidArgument, "an rsize sweep generates its master files; unset master");
      c.r_size = static_cast<std::uint64_t>(std::llround(value));
      break;
    case SweepAxis::kMemory: c.memory_bytes = static_cast<std::uint64_t>(std::llround(value * kMiB)); break;
    case SweepAxis::kSkew: c.zipf = value; break;
    case SweepAxis::kIb: c.i_b_bytes = static_cast<std::uint64_t>(std::llround(value * kMiB)); break;
  }
  return c;
}

std::string format_axis_value(SweepAxis axis, double value) {
  if (axis == SweepAxis::kRSize) return std::to_string(static_cast<std::uint64_t>(std::llround(value)));
  return format_double(value);
}

std::vector<CellResult> run_engines(const ExperimentConfig& config,
                                    const std::vector<EngineKind>& engines,
                                    const std::string& axis_value, const ProgressFn& progress,
                                    std::vector<std::vector<RunReport>>* reports_out) {
  std::vector<std::vector<RunReport>> reports(engines.size());
  std::vector<std::optional<std::string>> errors(engines.size());
  std::filesystem::path master;
  std::optional<std::string> setup_error;
  try {
    validate(config);
    master = ensure_master(config);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  for (std::uint32_t rep = 0; rep < config.reps && !setup_error; ++rep) {
    for (std::size_t i = 0; i < engines.size(); ++i) {
      if (errors[i]) continue;
      ExperimentConfig cfg = config;
      cfg.seed = config.seed + rep;
      try {
        reports[i].push_back(run_engine(to_engine_config(cfg, engines[i], master)));
        if (progress) progress({axis_value, engines[i], rep, &reports[i].back(), nullptr});
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (progress) progress({axis_value, engines[i], rep, nullptr, &*errors[i]});
      }
    }
  }
  std::vector<CellResult> cells;
  for (std::size_t i = 0; i < engines.size(); ++i) {
    if (setup_error || errors[i]) {
      CellResult r;
      r.axis_value = axis_value;
      r.engine = engines[i];
      r.error = setup_error ? *setup_error : *errors[i];
      cells.push_back(std::move(r));
    } else {
      for (auto& rep : reports[i]) rep.iterations.shrink_to_fit();
      cells.push_back(aggregate(axis_value, engines[i], reports[i]));
    }
  }
  if (reports_out != nullptr) *reports_out = std::move(reports);
  return cells;
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const ProgressFn& progress) {
  if (values.empty()) fail(ErrorCode::kInvalidArgument, "a sweep needs at least one value");
  SweepResult result;
  result.axis = sweep_axis_name(axis);
  {
    std::ostringstream os;
    write_experiment(os, base);
    std::istringstream is(os.str());
    const std::string skip = std::string(axis_setting(axis)) + "=";
    for (std::string line; std::getline(is, line);) {
      if (line.rfind(skip, 0) == 0) continue;
      if (line.rfind("engine=", 0) == 0) continue;  // the engines list is what varies per row
      if (line.rfind("seed=", 0) == 0) line += " (+ repetition index)";
      result.fixed.push_back(line);
    }
  }
  const auto& engines = base.engines.empty() ? all_engines() : base.engines;
  for (double v : values) {
    const std::string label = format_axis_value(axis, v);
    std::vector<CellResult> cells;
    try {
      cells = run_engines(at_sweep_point(base, axis, v), engines, label, progress);
    } catch (const std::exception& e) {
      for (EngineKind k : engines) {
        CellResult r;
        r.axis_value = label;
        r.engine = k;
        r.error = e.what();
        cells.push_back(std::move(r));
      }
    }
    result.rows.insert(result.rows.end(), cells.begin(), cells.end());
  }
  return result;
}

void write_csv_row(std::ostream& out, const CellResult& r) {
  out << r.axis_value << ',' << engine_name(r.engine) << ',' << r.reps << ','
      << format_double(r.mu_mean) << ',' << format_double(r.mu_std) << ','
      << format_double(r.omega_n_mean) << ',' << format_double(r.omega_s_mean) << ','
      << format_double(r.c_loop_mean_s) << ',' << format_double(r.cache_hit_ratio) << ','
      << format_double(r.dp_stall_ns) << ',' << format_double(r.orphans) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "# axis: " << result.axis << '\n';
  for (const auto& f : result.fixed) out << "# fixed: " << f << '\n';
  out << kCsvHeader << '\n';
  for (const auto& r : result.rows) {
    if (r.error) {
      std::string msg = *r.error;
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "# error: " << r.axis_value << ',' << engine_name(r.engine) << ',' << msg << '\n';
    } else {
      write_csv_row(out, r);
    }
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  SweepResult result;
  bool header = false;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::kParse, "sweep CSV line " + std::to_string(line_no) + ": " + what);
  };
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    if (line[0] == '#') {
      const std::string_view body = detail::trim(std::string_view(line).substr(1));
      if (body.rfind("axis:", 0) == 0) {
        result.axis = std::string(detail::trim(body.substr(5)));
      } else if (body.rfind("fixed:", 0) == 0) {
        result.fixed.emplace_back(detail::trim(body.substr(6)));
      } else if (body.rfind("error:", 0) == 0) {
        const std::string_view rest = detail::trim(body.substr(6));
        const auto c1 = rest.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : rest.find(',', c1 + 1);
        if (c2 == std::string_view::npos) bad("malformed error row");
        const auto kind = parse_engine(rest.substr(c1 + 1, c2 - c1 - 1));
        if (!kind) bad("unknown engine in error row");
        CellResult r;
        r.axis_value = std::string(rest.substr(0, c1));
        r.engine = *kind;
        r.error = std::string(rest.substr(c2 + 1));
        result.rows.push_back(std::move(r));
      }
      continue;
    }
    if (!header) {
      if (line != kCsvHeader) bad("expected the header '" + std::string(kCsvHeader) + "'");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 11) bad("expected 11 columns, found " + std::to_string(cells.size()));
    CellResult r;
    r.axis_value = cells[0];
    if (r.axis_value.empty()) bad("empty axis_value");
    const auto kind = parse_engine(cells[1]);
    if (!kind) bad("unknown engine '" + cells[1] + "'");
    r.engine = *kind;
    try {
      const auto reps = detail::parse_u64(cells[2], "reps");
      if (reps > 1000000) bad("reps out of range");
      r.reps = static_cast<std::uint32_t>(reps);
      double* fields[] = {&r.mu_mean,      &r.mu_std,          &r.omega_n_mean,
                          &r.omega_s_mean, &r.c_loop_mean_s,   &r.cache_hit_ratio,
                          &r.dp_stall_ns,  &r.orphans};
      static constexpr const char* kNames[] = {"mu_mean",       "mu_std",          "omega_n_mean",
                                               "omega_s_mean",  "c_loop_mean_s",   "cache_hit_ratio",
                                               "dp_stall_ns",   "orphans"};
      for (std::size_t i = 0; i < 8; ++i) *fields[i] = detail::parse_double(cells[3 + i], kNames[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParse || std::string(e.what()).rfind("sweep CSV", 0) == 0) throw;
      bad(e.what());
    }
    result.rows.push_back(std::move(r));
  }
  if (!header) {
    line_no = std::max<std::size_t>(line_no, 1);
    bad("no header row; the file is empty or not a sweep CSV");
  }
  return result;
}

namespace {

struct Series {
  EngineKind engine;
  std::vector<std::optional<std::pair<double, double>>> points;  // (mean, std) per x
};

struct PlotTable {
  std::vector<std::string> xs;
  std::vector<Series> series;
};

PlotTable tabulate(const SweepResult& result) {
  PlotTable t;
  for (const auto& r : result.rows) {
    if (std::find(t.xs.begin(), t.xs.end(), r.axis_value) == t.xs.end()) t.xs.push_back(r.axis_value);
  }
  for (EngineKind k : all_engines()) {
    Series s{k, std::vector<std::optional<std::pair<double, double>>>(t.xs.size())};
    bool any = false;
    for (const auto& r : result.rows) {
      if (r.engine != k) continue;
      any = true;
      if (r.error) continue;
      const auto idx = std::find(t.xs.begin(), t.xs.end(), r.axis_value) - t.xs.begin();
      s.points[static_cast<std::size_t>(idx)] = std::make_pair(r.mu_mean, r.mu_std);
    }
    if (any) t.series.push_back(std::move(s));
  }
  if (t.xs.empty()) fail(ErrorCode::kParse, "sweep CSV holds no rows to plot");
  return t;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string axis_title(const std::string& axis) {
  if (axis == "rsize") return "size of R (records)";
  if (axis == "memory") return "memory budget M (MB)";
  if (axis == "skew") return "Zipf exponent";
  if (axis == "ib") return "intermediate buffer i_B (MB)";
  return axis.empty() ? "sweep value" : axis;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_plot_data(std::ostream& out, const SweepResult& result) {
  const PlotTable t = tabulate(result);
  out << "# service rate (records/s) against " << axis_title(result.axis) << '\n';
  out << "# " << (result.axis.empty() ? "x" : result.axis);
  for (const auto& s : t.series) out << ' ' << engine_name(s.engine) << "_mu " << engine_name(s.engine) << "_std";
  out << '\n';
  for (std::size_t i = 0; i < t.xs.size(); ++i) {
    out << t.xs[i];
    for (const auto& s : t.series) {
      if (s.points[i]) {
        out << ' ' << fixed3(s.points[i]->first) << ' ' << fixed3(s.points[i]->second);
      } else {
        out << " nan nan";
      }
    }
    out << '\n';
  }
}

void write_plot_svg(std::ostream& out, const SweepResult& result) {
  const PlotTable t = tabulate(result);
  constexpr double kW = 640, kH = 420, kLeft = 90, kRight = 150, kTop = 40, kBottom = 60;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;

  double ymax = 0;
  for (const auto& s : t.series) {
    for (const auto& p : s.points) {
      if (p) ymax = std::max(ymax, p->first + p->second);
    }
  }
  // A 1-2-5 tick step giving at most 6 intervals.
  double step = 1;
  if (ymax > 0) {
    const double raw = ymax / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      step = m * mag;
      if (raw <= step) break;
    }
  }
  const double ytop = ymax > 0 ? std::ceil(ymax / step) * step : 1.0;
  auto px = [&](std::size_t i) {
    return t.xs.size() == 1 ? kLeft + pw / 2 : kLeft + pw * double(i) / double(t.xs.size() - 1);
  };
  auto py = [&](double v) { return kTop + ph * (1 - v / ytop); };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  static constexpr const char* kDash[] = {"", " stroke-dasharray=\"6 3\"", " stroke-dasharray=\"2 2\""};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Service rate vs "
      << xml_escape(axis_title(result.axis)) << "</text>\n";
  for (double v = 0; v <= ytop + step / 2; v += step) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << fixed3(py(v)) << "\" x2=\"" << kLeft + pw
        << "\" y2=\"" << fixed3(py(v)) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed3(py(v) + 4)
        << "\" text-anchor=\"end\">" << format_double(v) << "</text>\n";
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < t.xs.size(); ++i) {
    out << "<text x=\"" << fixed3(px(i)) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">" << xml_escape(t.xs[i]) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">"
      << xml_escape(axis_title(result.axis)) << "</text>\n";
  out << "<text transform=\"translate(20," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">service rate (records/s)</text>\n";

  for (std::size_t si = 0; si < t.series.size(); ++si) {
    const auto& s = t.series[si];
    const std::size_t ci = static_cast<std::size_t>(s.engine);
    std::string path;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (!s.points[i]) continue;
      path += (path.empty() ? "M" : " L") + fixed3(px(i)) + ',' + fixed3(py(s.points[i]->first));
    }
    out << "<g class=\"series\" data-engine=\"" << engine_name(s.engine) << "\">\n";
    if (!path.empty()) {
      out << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << kColors[ci]
          << "\" stroke-width=\"2\"" << kDash[ci] << "/>\n";
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (!s.points[i]) continue;
      const double x = px(i), m = s.points[i]->first, sd = s.points[i]->second;
      if (sd > 0) {
        out << "<line x1=\"" << fixed3(x) << "\" y1=\"" << fixed3(py(m - sd)) << "\" x2=\""
            << fixed3(x) << "\" y2=\"" << fixed3(py(m + sd)) << "\" stroke=\"" << kColors[ci]
            << "\"/>\n";
      }
      out << "<circle cx=\"" << fixed3(x) << "\" cy=\"" << fixed3(py(m)) << "\" r=\"3\" fill=\""
          << kColors[ci] << "\"/>\n";
    }
    const double ly = kTop + 10 + 20 * double(si);
    out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 36
        << "\" y2=\"" << ly << "\" stroke=\"" << kColors[ci] << "\" stroke-width=\"2\""
        << kDash[ci] << "/>\n";
    out << "<text x=\"" << kLeft + pw + 42 << "\" y=\"" << ly + 4 << "\">"
        << engine_name(s.engine) << "</text>\n";
    out << "</g>\n";
  }
  out << "</svg>\n";
}

std::vector<std::filesystem::path> write_plots(const SweepResult& result,
                                               const std::filesystem::path& stem) {
  // Render both before touching the filesystem so a bad input leaves no files.
  std::ostringstream dat, svg;
  write_plot_data(dat, result);
  write_plot_svg(svg, result);
  std::vector<std::filesystem::path> paths;
  for (const auto& [ext, text] : {std::pair{".dat", dat.str()}, std::pair{".svg", svg.str()}}) {
    auto p = stem;
    p += ext;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text) || !f.flush()) fail(ErrorCode::kStorage, "cannot write '" + p.string() + "'");
    paths.push_back(p);
  }
  return paths;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "spearman_rho needs two equal-length samples of size >= 2");
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (double(i) + double(j)) / 2 + 1;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  // A constant sample has no trend.
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cachejoin
