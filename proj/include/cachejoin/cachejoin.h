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

/* C interface to the CacheJoin engines and experiment harness.
 *
 * Every function returns a cj_status. On failure the message of the most
 * recent error on the calling thread is available from cj_last_error().
 * Handles are opaque; each free and close function accepts NULL. Strings
 * returned through char** are heap allocated and released with
 * cj_string_free. */

#ifndef CACHEJOIN_CACHEJOIN_H_
#define CACHEJOIN_CACHEJOIN_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define CJ_API __attribute__((visibility("default")))
#else
#define CJ_API
#endif

typedef enum cj_status {
  CJ_OK = 0,
  CJ_ERR_INVALID_ARGUMENT = 1,
  CJ_ERR_STORAGE = 2,
  CJ_ERR_FORMAT = 3,
  CJ_ERR_CORRUPTION = 4,
  CJ_ERR_CAPACITY = 5,
  CJ_ERR_EMPTY_RELATION = 6,
  CJ_ERR_INSUFFICIENT_MEMORY = 7,
  CJ_ERR_DOMAIN = 8,
  CJ_ERR_PARSE = 9,
  CJ_ERR_TIMEOUT = 10,
  CJ_ERR_CONTRACT_VIOLATION = 11,
  CJ_ERR_INTERNAL = 12
} cj_status;

/* Static description of a status code. */
CJ_API const char* cj_status_name(cj_status status);
/* Message of the last failure on this thread; "" if none. Valid until the
 * next failing call on the same thread. */
CJ_API const char* cj_last_error(void);
CJ_API void cj_string_free(char* s);

/* ---- Master relation ------------------------------------------------- */

typedef struct cj_master cj_master;

typedef struct cj_master_summary {
  uint64_t record_count;
  uint64_t byte_size;
  uint64_t checksum; /* FNV-1a 64 over the file */
} cj_master_summary;

/* Writes `count` records with keys 1..count; `summary` may be NULL. */
CJ_API cj_status cj_master_generate(const char* path, uint64_t count, uint64_t seed,
                                    cj_master_summary* summary);
/* read_mode: "direct" or "buffered". */
CJ_API cj_status cj_master_open(const char* path, const char* read_mode, cj_master** out);
CJ_API void cj_master_close(cj_master* master);
CJ_API uint64_t cj_master_record_count(const cj_master* master);
CJ_API cj_status cj_master_contains(const cj_master* master, uint64_t key, int* found);
/* Keys of the partition of up to d_b records starting at start_key.
 * `keys` must hold d_b entries; `*count` receives the number written. */
CJ_API cj_status cj_master_read_partition(const cj_master* master, uint64_t start_key,
                                          size_t d_b, uint64_t* keys, size_t* count);

/* ---- Experiment configuration ---------------------------------------- */

/* A flat key=value experiment description (engine, memory, d_b, i_b, zipf,
 * stream_records, reps, ...). cj_config_dump lists every key. */
typedef struct cj_config cj_config;

/* preset: "desk" or "full". */
CJ_API cj_status cj_config_new(const char* preset, cj_config** out);
CJ_API void cj_config_free(cj_config* config);
CJ_API cj_status cj_config_set(cj_config* config, const char* key, const char* value);
/* Applies a key=value file on top of the current settings. */
CJ_API cj_status cj_config_load(cj_config* config, const char* path);
CJ_API cj_status cj_config_dump(const cj_config* config, char** out);
CJ_API cj_status cj_config_validate(const cj_config* config);
/* Generates (or reuses) the configured master file; `path` may be NULL. */
CJ_API cj_status cj_config_master(const cj_config* config, char** path);
/* Generates stream_records records with the configured Zipf settings over
 * the configured master relation and writes them as a replay file. */
CJ_API cj_status cj_stream_generate(const cj_config* config, const char* out_path);

/* ---- Runs ------------------------------------------------------------ */

typedef struct cj_report cj_report;

typedef struct cj_report_stats {
  const char* engine; /* static string */
  uint64_t memory_bytes;
  uint64_t d_b;
  uint64_t h_r;
  uint64_t i_b; /* records */
  uint64_t h_s;
  uint64_t stream_consumed;
  uint64_t output_count;
  uint64_t output_checksum;
  uint64_t orphans;
  uint64_t cache_lookups;
  uint64_t cache_hits;
  uint64_t structure_violations;
  uint64_t iterations;
  uint64_t included_iterations;
  double mu;
  double mean_omega_n;
  double mean_omega_s;
  double mean_c_loop_s;
  double mean_load_ns;
  double mean_stall_ns;
  double wall_seconds;
} cj_report_stats;

/* Runs the configured engine once. `rep` offsets the stream seed, as
 * repetitions in a sweep do. */
CJ_API cj_status cj_run(const cj_config* config, uint32_t rep, cj_report** out);
CJ_API void cj_report_free(cj_report* report);
CJ_API cj_status cj_report_stats_get(const cj_report* report, cj_report_stats* out);
CJ_API size_t cj_report_warning_count(const cj_report* report);
/* NULL when index is out of range; valid while the report lives. */
CJ_API const char* cj_report_warning(const cj_report* report, size_t index);
/* kind: "report" (key=value summary) or "iterations" (per-iteration CSV). */
CJ_API cj_status cj_report_format(const cj_report* report, const char* kind, char** out);
/* Reads the "report" form back; per-iteration data is not restored. */
CJ_API cj_status cj_report_load(const char* path, cj_report** out);

/* One aggregated CSV row: the repetitions of one engine at one point. */
typedef struct cj_row {
  char axis_value[32];
  const char* engine; /* static string */
  uint32_t reps;
  double mu_mean;
  double mu_std;
  double omega_n_mean;
  double omega_s_mean;
  double c_loop_mean_s;
  double cache_hit_ratio;
  double dp_stall_ns;
  double orphans;
  /* Empty unless the cell failed; then the numeric fields are zero. */
  char error[256];
} cj_row;

CJ_API cj_status cj_aggregate(const cj_report* const* reports, size_t n, const char* axis_value,
                              cj_row* out);
/* The CSV header line (static, no newline). */
CJ_API const char* cj_csv_header(void);
CJ_API cj_status cj_row_format(const cj_row* row, char** out);

/* ---- Sweeps and plots ------------------------------------------------ */

typedef struct cj_sweep cj_sweep;

/* Called after every run; `error` is NULL on success, `mu` 0 on failure. */
typedef void (*cj_progress_fn)(void* user, const char* axis_value, const char* engine,
                               uint32_t rep, double mu, const char* error);

/* axis: "rsize", "memory" (MB), "skew" or "ib" (MB). With n_values == 0
 * the axis defaults are used. The engines come from the config key
 * "engines". Failed cells become error rows; the sweep continues. */
CJ_API cj_status cj_sweep_run(const cj_config* config, const char* axis, const double* values,
                              size_t n_values, cj_progress_fn progress, void* user,
                              cj_sweep** out);
CJ_API void cj_sweep_free(cj_sweep* sweep);
CJ_API size_t cj_sweep_row_count(const cj_sweep* sweep);
CJ_API cj_status cj_sweep_row(const cj_sweep* sweep, size_t index, cj_row* out);
CJ_API cj_status cj_sweep_write_csv(const cj_sweep* sweep, const char* path);
CJ_API cj_status cj_sweep_read_csv(const char* path, cj_sweep** out);
/* Writes <stem>.dat and <stem>.svg. `written` (may be NULL) receives the
 * two paths separated by a newline. */
CJ_API cj_status cj_plot(const cj_sweep* sweep, const char* stem, char** written);
/* Spearman rank correlation of two samples of length n >= 2. */
CJ_API cj_status cj_spearman(const double* x, const double* y, size_t n, double* rho);

/* ---- Cost model ------------------------------------------------------ */

typedef struct cj_constants cj_constants;

typedef struct cj_calibrate_options {
  const char* master_path;
  const char* read_mode;     /* NULL: "direct" */
  const uint64_t* d_b_values; /* NULL: { 850 } */
  size_t n_d_b_values;
  size_t trials;             /* 0: 31; otherwise at least 30 */
  uint64_t seed;
} cj_calibrate_options;

CJ_API cj_status cj_calibrate(const cj_calibrate_options* options, cj_constants** out);
CJ_API void cj_constants_free(cj_constants* constants);
CJ_API cj_status cj_constants_load(const char* path, cj_constants** out);
CJ_API cj_status cj_constants_save(const cj_constants* constants, const char* path);
/* The key=value form; calibration warnings are appended as comments. */
CJ_API cj_status cj_constants_format(const cj_constants* constants, char** out);
CJ_API size_t cj_constants_warning_count(const cj_constants* constants);
CJ_API const char* cj_constants_warning(const cj_constants* constants, size_t index);

typedef struct cj_prediction {
  double c_loop; /* seconds */
  double mu;     /* records per second */
  double io_term;
  double probe_term;
  double stream_term;
  double cache_term;
} cj_prediction;

/* variant: "p" or "op" (engine names are accepted too). */
CJ_API cj_status cj_predict(const cj_constants* constants, uint64_t d_b, double omega_n,
                            double omega_s, const char* variant, cj_prediction* out);
CJ_API cj_status cj_prediction_save(const cj_prediction* prediction, const char* path);
CJ_API cj_status cj_prediction_load(const char* path, cj_prediction* out);

typedef struct cj_memory {
  double disk_buffer_bytes;
  double cache_bytes;
  double intermediate_bytes;
  double stream_store_bytes;
  double queue_bytes;
  double slack_bytes;
  double total_bytes;
} cj_memory;

/* Memory split for the configured M, d_B, h_R, i_B and alpha. */
CJ_API cj_status cj_predict_memory(const cj_config* config, const char* variant, cj_memory* out);

typedef struct cj_comparison {
  double predicted_c_loop;
  double measured_c_loop;
  double predicted_mu;
  double measured_mu;
  double c_loop_error; /* |predicted - measured| / measured */
  double mu_error;
} cj_comparison;

CJ_API cj_status cj_compare(const cj_prediction* prediction, const cj_report* report,
                            cj_comparison* out);

#ifdef __cplusplus
}
#endif

#endif /* CACHEJOIN_CACHEJOIN_H_ */
