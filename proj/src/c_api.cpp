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

// extern "C" wrappers: every entry point translates exceptions into a
// cj_status and a thread-local message.

#include "cachejoin/cachejoin.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "cachejoin/cost_model.hpp"
#include "cachejoin/engine.hpp"
#include "cachejoin/error.hpp"
#include "cachejoin/experiment.hpp"
#include "cachejoin/master_store.hpp"
#include "cachejoin/stream_source.hpp"

struct cj_master {
  cachejoin::MasterStore store;
};

struct cj_config {
  cachejoin::ExperimentConfig config;
};

struct cj_report {
  cachejoin::RunReport report;
};

struct cj_sweep {
  cachejoin::SweepResult result;
};

struct cj_constants {
  cachejoin::CostConstants constants;
  std::vector<std::string> warnings;
};

namespace {

using cachejoin::ErrorCode;

thread_local std::string g_last_error;

cj_status set_error(cj_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
cj_status guarded(F&& body) noexcept {
  try {
    body();
    return CJ_OK;
  } catch (const cachejoin::Error& e) {
    return set_error(static_cast<cj_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CJ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CJ_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CJ_ERR_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) cachejoin::fail(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

cachejoin::ReadMode parse_read_mode(const char* mode) {
  if (mode == nullptr || std::strcmp(mode, "direct") == 0) return cachejoin::ReadMode::kDirect;
  if (std::strcmp(mode, "buffered") == 0) return cachejoin::ReadMode::kBuffered;
  cachejoin::fail(ErrorCode::kInvalidArgument,
                  std::string("read mode must be 'direct' or 'buffered', got '") + mode + "'");
}

cachejoin::CostVariant parse_variant(const char* name) {
  require(name != nullptr, "variant is null");
  const auto v = cachejoin::parse_cost_variant(name);
  if (!v) {
    cachejoin::fail(ErrorCode::kInvalidArgument,
                    std::string("unknown cost variant '") + name + "' (expected p or op)");
  }
  return *v;
}

template <std::size_t N>
void copy_truncated(char (&dst)[N], const std::string& src) {
  const std::size_t n = std::min(src.size(), N - 1);
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

void to_row(const cachejoin::CellResult& c, cj_row* out) {
  *out = cj_row{};
  copy_truncated(out->axis_value, c.axis_value);
  out->engine = cachejoin::engine_name(c.engine);
  if (c.error) {
    copy_truncated(out->error, *c.error);
    return;
  }
  out->reps = c.reps;
  out->mu_mean = c.mu_mean;
  out->mu_std = c.mu_std;
  out->omega_n_mean = c.omega_n_mean;
  out->omega_s_mean = c.omega_s_mean;
  out->c_loop_mean_s = c.c_loop_mean_s;
  out->cache_hit_ratio = c.cache_hit_ratio;
  out->dp_stall_ns = c.dp_stall_ns;
  out->orphans = c.orphans;
}

cachejoin::CellResult from_row(const cj_row& r) {
  cachejoin::CellResult c;
  c.axis_value = r.axis_value;
  const auto kind = cachejoin::parse_engine(r.engine != nullptr ? r.engine : "");
  require(kind.has_value(), "row has an unknown engine");
  c.engine = *kind;
  if (r.error[0] != '\0') {
    c.error = std::string(r.error);
    return c;
  }
  c.reps = r.reps;
  c.mu_mean = r.mu_mean;
  c.mu_std = r.mu_std;
  c.omega_n_mean = r.omega_n_mean;
  c.omega_s_mean = r.omega_s_mean;
  c.c_loop_mean_s = r.c_loop_mean_s;
  c.cache_hit_ratio = r.cache_hit_ratio;
  c.dp_stall_ns = r.dp_stall_ns;
  c.orphans = r.orphans;
  return c;
}

cachejoin::CostPrediction from_c(const cj_prediction& p) {
  return {p.c_loop, p.mu, p.io_term, p.probe_term, p.stream_term, p.cache_term};
}

cj_prediction to_c(const cachejoin::CostPrediction& p) {
  return {p.c_loop, p.mu, p.io_term, p.probe_term, p.stream_term, p.cache_term};
}

}  // namespace

extern "C" {

const char* cj_status_name(cj_status status) {
  if (status == CJ_OK) return "ok";
  if (status < CJ_ERR_INVALID_ARGUMENT || status > CJ_ERR_INTERNAL) return "unknown status";
  return cachejoin::error_code_name(static_cast<ErrorCode>(status));
}

const char* cj_last_error(void) { return g_last_error.c_str(); }

void cj_string_free(char* s) { std::free(s); }

// ---- Master relation ------------------------------------------------------

cj_status cj_master_generate(const char* path, uint64_t count, uint64_t seed,
                             cj_master_summary* summary) {
  return guarded([&] {
    require(path != nullptr, "path is null");
    const auto s = cachejoin::generate_master(path, count, seed);
    if (summary != nullptr) *summary = {s.record_count, s.byte_size, s.checksum};
  });
}

cj_status cj_master_open(const char* path, const char* read_mode, cj_master** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    *out = new cj_master{cachejoin::MasterStore::open(path, parse_read_mode(read_mode))};
  });
}

void cj_master_close(cj_master* master) { delete master; }

uint64_t cj_master_record_count(const cj_master* master) {
  return master == nullptr ? 0 : master->store.record_count();
}

cj_status cj_master_contains(const cj_master* master, uint64_t key, int* found) {
  return guarded([&] {
    require(master != nullptr && found != nullptr, "master and found must not be null");
    *found = master->store.contains_key(key) ? 1 : 0;
  });
}

cj_status cj_master_read_partition(const cj_master* master, uint64_t start_key, size_t d_b,
                                   uint64_t* keys, size_t* count) {
  return guarded([&] {
    require(master != nullptr && keys != nullptr && count != nullptr,
            "master, keys and count must not be null");
    const cachejoin::Partition p = master->store.read_partition(start_key, d_b);
    for (std::size_t i = 0; i < p.size(); ++i) keys[i] = p.key(i);
    *count = p.size();
  });
}

// ---- Configuration --------------------------------------------------------

cj_status cj_config_new(const char* preset, cj_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    auto c = std::make_unique<cj_config>();
    if (preset != nullptr) cachejoin::apply_setting(c->config, "preset", preset);
    *out = c.release();
  });
}

void cj_config_free(cj_config* config) { delete config; }

cj_status cj_config_set(cj_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr,
            "config, key and value must not be null");
    cachejoin::apply_setting(config->config, key, value);
  });
}

cj_status cj_config_load(cj_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "config and path must not be null");
    config->config = cachejoin::load_experiment(path, config->config);
  });
}

cj_status cj_config_dump(const cj_config* config, char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "config and out must not be null");
    std::ostringstream os;
    cachejoin::write_experiment(os, config->config);
    *out = dup_string(os.str());
  });
}

cj_status cj_config_validate(const cj_config* config) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    cachejoin::validate(config->config);
  });
}

cj_status cj_config_master(const cj_config* config, char** path) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    const auto p = cachejoin::ensure_master(config->config);
    if (path != nullptr) *path = dup_string(p.string());
  });
}

cj_status cj_stream_generate(const cj_config* config, const char* out_path) {
  return guarded([&] {
    require(config != nullptr && out_path != nullptr, "config and out_path must not be null");
    const auto& c = config->config;
    if (c.stream_records == 0) {
      cachejoin::fail(ErrorCode::kInvalidArgument,
                      "a replay file needs stream_records > 0");
    }
    const auto master = cachejoin::ensure_master(c);
    const auto store = cachejoin::MasterStore::open(master, cachejoin::ReadMode::kBuffered);
    cachejoin::ZipfSpec spec;
    spec.exponent = c.zipf;
    spec.seed = c.seed;
    spec.rank_to_key = c.rank_to_key;
    spec.orphan_rate = c.orphan_rate;
    cachejoin::ZipfGenerator gen(spec, cachejoin::KeySpace::of(store));
    std::vector<cachejoin::StreamRecord> records(c.stream_records);
    gen.fill(records);
    cachejoin::write_stream_file(out_path, records);
  });
}

// ---- Runs -----------------------------------------------------------------

cj_status cj_run(const cj_config* config, uint32_t rep, cj_report** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "config and out must not be null");
    cachejoin::ExperimentConfig c = config->config;
    cachejoin::validate(c);
    c.seed += rep;
    const auto master = cachejoin::ensure_master(c);
    auto r = std::make_unique<cj_report>();
    r->report = cachejoin::run_engine(cachejoin::to_engine_config(c, c.engine, master));
    *out = r.release();
  });
}

void cj_report_free(cj_report* report) { delete report; }

cj_status cj_report_stats_get(const cj_report* report, cj_report_stats* out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "report and out must not be null");
    const auto& r = report->report;
    *out = cj_report_stats{};
    out->engine = cachejoin::engine_name(r.engine);
    out->memory_bytes = r.budget.total_bytes;
    out->d_b = r.budget.d_b;
    out->h_r = r.budget.h_r;
    out->i_b = r.budget.i_b;
    out->h_s = r.budget.h_s;
    out->stream_consumed = r.stream_consumed;
    out->output_count = r.output_count;
    out->output_checksum = r.output_checksum;
    out->orphans = r.orphan_count;
    out->cache_lookups = r.cache_lookups;
    out->cache_hits = r.cache_hits;
    out->structure_violations = r.structure_violations;
    out->iterations = r.iterations.size();
    out->included_iterations = r.included_iterations;
    out->mu = r.mu;
    out->mean_omega_n = r.mean_omega_n;
    out->mean_omega_s = r.mean_omega_s;
    out->mean_c_loop_s = r.mean_c_loop_s;
    out->mean_load_ns = r.mean_load_ns;
    out->mean_stall_ns = r.mean_stall_ns;
    out->wall_seconds = r.wall_seconds;
  });
}

size_t cj_report_warning_count(const cj_report* report) {
  return report == nullptr ? 0 : report->report.warnings.size();
}

const char* cj_report_warning(const cj_report* report, size_t index) {
  if (report == nullptr || index >= report->report.warnings.size()) return nullptr;
  return report->report.warnings[index].c_str();
}

cj_status cj_report_format(const cj_report* report, const char* kind, char** out) {
  return guarded([&] {
    require(report != nullptr && kind != nullptr && out != nullptr,
            "report, kind and out must not be null");
    std::ostringstream os;
    if (std::strcmp(kind, "report") == 0) {
      cachejoin::write_report(os, report->report);
    } else if (std::strcmp(kind, "iterations") == 0) {
      cachejoin::write_iteration_log(os, report->report);
    } else {
      cachejoin::fail(ErrorCode::kInvalidArgument,
                      std::string("report kind must be 'report' or 'iterations', got '") + kind +
                          "'");
    }
    *out = dup_string(os.str());
  });
}

cj_status cj_report_load(const char* path, cj_report** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    std::ifstream in(path);
    if (!in) cachejoin::fail(ErrorCode::kStorage, std::string("cannot open report '") + path + "'");
    auto r = std::make_unique<cj_report>();
    r->report = cachejoin::read_report(in, path);
    *out = r.release();
  });
}

cj_status cj_aggregate(const cj_report* const* reports, size_t n, const char* axis_value,
                       cj_row* out) {
  return guarded([&] {
    require(reports != nullptr && n > 0 && out != nullptr, "need at least one report");
    std::vector<cachejoin::RunReport> copies;
    copies.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      require(reports[i] != nullptr, "null report");
      require(reports[i]->report.engine == reports[0]->report.engine,
              "aggregated reports must come from one engine");
      cachejoin::RunReport r = reports[i]->report;
      r.iterations.clear();
      r.outputs.clear();
      copies.push_back(std::move(r));
    }
    to_row(cachejoin::aggregate(axis_value != nullptr ? axis_value : "", copies[0].engine, copies),
           out);
  });
}

const char* cj_csv_header(void) { return cachejoin::kCsvHeader.data(); }

cj_status cj_row_format(const cj_row* row, char** out) {
  return guarded([&] {
    require(row != nullptr && out != nullptr, "row and out must not be null");
    std::ostringstream os;
    cachejoin::write_csv_row(os, from_row(*row));
    *out = dup_string(os.str());
  });
}

// ---- Sweeps ---------------------------------------------------------------

cj_status cj_sweep_run(const cj_config* config, const char* axis, const double* values,
                       size_t n_values, cj_progress_fn progress, void* user, cj_sweep** out) {
  return guarded([&] {
    require(config != nullptr && axis != nullptr && out != nullptr,
            "config, axis and out must not be null");
    require(n_values == 0 || values != nullptr, "values is null");
    const auto a = cachejoin::parse_sweep_axis(axis);
    if (!a) {
      cachejoin::fail(ErrorCode::kInvalidArgument,
                      std::string("unknown sweep axis '") + axis +
                          "' (expected rsize, memory, skew or ib)");
    }
    const std::vector<double> vals = n_values == 0 ? cachejoin::default_sweep_values(*a)
                                                   : std::vector<double>(values, values + n_values);
    cachejoin::ProgressFn fn;
    if (progress != nullptr) {
      fn = [progress, user](const cachejoin::ProgressEvent& e) {
        progress(user, e.axis_value.c_str(), cachejoin::engine_name(e.engine), e.rep,
                 e.report != nullptr ? e.report->mu : 0.0,
                 e.error != nullptr ? e.error->c_str() : nullptr);
      };
    }
    auto s = std::make_unique<cj_sweep>();
    s->result = cachejoin::run_sweep(config->config, *a, vals, fn);
    *out = s.release();
  });
}

void cj_sweep_free(cj_sweep* sweep) { delete sweep; }

size_t cj_sweep_row_count(const cj_sweep* sweep) {
  return sweep == nullptr ? 0 : sweep->result.rows.size();
}

cj_status cj_sweep_row(const cj_sweep* sweep, size_t index, cj_row* out) {
  return guarded([&] {
    require(sweep != nullptr && out != nullptr, "sweep and out must not be null");
    require(index < sweep->result.rows.size(), "row index out of range");
    to_row(sweep->result.rows[index], out);
  });
}

cj_status cj_sweep_write_csv(const cj_sweep* sweep, const char* path) {
  return guarded([&] {
    require(sweep != nullptr && path != nullptr, "sweep and path must not be null");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) cachejoin::fail(ErrorCode::kStorage, std::string("cannot create '") + path + "'");
    cachejoin::write_sweep_csv(f, sweep->result);
    if (!f.flush()) cachejoin::fail(ErrorCode::kStorage, std::string("cannot write '") + path + "'");
  });
}

cj_status cj_sweep_read_csv(const char* path, cj_sweep** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    std::ifstream f(path);
    if (!f) cachejoin::fail(ErrorCode::kStorage, std::string("cannot open '") + path + "'");
    auto s = std::make_unique<cj_sweep>();
    s->result = cachejoin::read_sweep_csv(f);
    *out = s.release();
  });
}

cj_status cj_plot(const cj_sweep* sweep, const char* stem, char** written) {
  return guarded([&] {
    require(sweep != nullptr && stem != nullptr, "sweep and stem must not be null");
    const auto paths = cachejoin::write_plots(sweep->result, stem);
    if (written != nullptr) *written = dup_string(paths[0].string() + "\n" + paths[1].string());
  });
}

cj_status cj_spearman(const double* x, const double* y, size_t n, double* rho) {
  return guarded([&] {
    require(x != nullptr && y != nullptr && rho != nullptr, "x, y and rho must not be null");
    *rho = cachejoin::spearman_rho(std::vector<double>(x, x + n), std::vector<double>(y, y + n));
  });
}

// ---- Cost model -----------------------------------------------------------

cj_status cj_calibrate(const cj_calibrate_options* options, cj_constants** out) {
  return guarded([&] {
    require(options != nullptr && options->master_path != nullptr && out != nullptr,
            "options, master_path and out must not be null");
    cachejoin::CalibrationOptions o;
    o.master_path = options->master_path;
    o.read_mode = parse_read_mode(options->read_mode);
    if (options->d_b_values != nullptr) {
      o.d_b_values.assign(options->d_b_values, options->d_b_values + options->n_d_b_values);
    }
    if (options->trials != 0) o.trials = options->trials;
    if (options->seed != 0) o.seed = options->seed;
    const cachejoin::Calibration cal = cachejoin::calibrate(o);
    *out = new cj_constants{cal.constants, cal.warnings};
  });
}

void cj_constants_free(cj_constants* constants) { delete constants; }

cj_status cj_constants_load(const char* path, cj_constants** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    *out = new cj_constants{cachejoin::load_constants(path), {}};
  });
}

cj_status cj_constants_save(const cj_constants* constants, const char* path) {
  return guarded([&] {
    require(constants != nullptr && path != nullptr, "constants and path must not be null");
    cachejoin::save_constants(path, constants->constants);
  });
}

cj_status cj_constants_format(const cj_constants* constants, char** out) {
  return guarded([&] {
    require(constants != nullptr && out != nullptr, "constants and out must not be null");
    std::ostringstream os;
    cachejoin::write_constants(os, constants->constants);
    for (const auto& w : constants->warnings) os << "# warning: " << w << '\n';
    *out = dup_string(os.str());
  });
}

size_t cj_constants_warning_count(const cj_constants* constants) {
  return constants == nullptr ? 0 : constants->warnings.size();
}

const char* cj_constants_warning(const cj_constants* constants, size_t index) {
  if (constants == nullptr || index >= constants->warnings.size()) return nullptr;
  return constants->warnings[index].c_str();
}

cj_status cj_predict(const cj_constants* constants, uint64_t d_b, double omega_n, double omega_s,
                     const char* variant, cj_prediction* out) {
  return guarded([&] {
    require(constants != nullptr && out != nullptr, "constants and out must not be null");
    *out = to_c(cachejoin::predict_c_loop(constants->constants, d_b, omega_n, omega_s,
                                          parse_variant(variant)));
  });
}

cj_status cj_prediction_save(const cj_prediction* prediction, const char* path) {
  return guarded([&] {
    require(prediction != nullptr && path != nullptr, "prediction and path must not be null");
    std::ofstream f(path, std::ios::trunc);
    if (!f) cachejoin::fail(ErrorCode::kStorage, std::string("cannot create '") + path + "'");
    cachejoin::write_prediction(f, from_c(*prediction));
    if (!f.flush()) cachejoin::fail(ErrorCode::kStorage, std::string("cannot write '") + path + "'");
  });
}

cj_status cj_prediction_load(const char* path, cj_prediction* out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    std::ifstream f(path);
    if (!f) {
      cachejoin::fail(ErrorCode::kStorage, std::string("cannot open prediction '") + path +
                                               "'; create one with the predict subcommand");
    }
    *out = to_c(cachejoin::read_prediction(f));
  });
}

cj_status cj_predict_memory(const cj_config* config, const char* variant, cj_memory* out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "config and out must not be null");
    const auto& c = config->config;
    cachejoin::BudgetRequest req;
    req.total_bytes = c.memory_bytes;
    req.d_b = c.d_b;
    req.h_r = c.h_r;
    req.i_b_bytes = c.i_b_bytes;
    req.alpha = c.alpha;
    req.fudge = c.fudge;
    const auto m = cachejoin::predict_memory(req, parse_variant(variant));
    *out = {m.disk_buffer_bytes, m.cache_bytes,  m.intermediate_bytes, m.stream_store_bytes,
            m.queue_bytes,       m.slack_bytes, m.total_bytes};
  });
}

cj_status cj_compare(const cj_prediction* prediction, const cj_report* report,
                     cj_comparison* out) {
  return guarded([&] {
    require(prediction != nullptr && report != nullptr && out != nullptr,
            "prediction, report and out must not be null");
    const auto c = cachejoin::compare(from_c(*prediction), report->report);
    *out = {c.predicted_c_loop, c.measured_c_loop, c.predicted_mu,
            c.measured_mu,      c.c_loop_error,    c.mu_error};
  });
}

}  // extern "C"
