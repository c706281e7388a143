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

// Acceptance run: measures every acceptance criterion on this host and
// prints one PASS/FAIL line per criterion, followed by the measurements
// behind each verdict. Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../common/stress.hpp"
#include "cachejoin/cost_model.hpp"
#include "cachejoin/engine.hpp"
#include "cachejoin/error.hpp"
#include "cachejoin/experiment.hpp"
#include "cachejoin/memory_budget.hpp"
#include "cachejoin/stream_source.hpp"

namespace cj = cachejoin;
using Clock = std::chrono::steady_clock;

namespace {

const cj::EngineKind kEngines[] = {cj::EngineKind::kCacheJoin, cj::EngineKind::kPCacheJoin,
                                   cj::EngineKind::kOpCacheJoin};

struct Options {
  std::filesystem::path work_dir = "acceptance-data";
  double desk_seconds = 4;   // per run at desk scale
  double sweep_seconds = 2;  // per run in the sweeps
  std::uint32_t reps = 3;
  std::vector<int> only;
};

struct Verdict {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string rate(double mu) { return fmt("%.0f", mu) + " rec/s"; }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

cj::ProgressFn progress_fn(const std::string& label) {
  return [label](const cj::ProgressEvent& e) {
    std::ostringstream os;
    os << label << " " << e.axis_value << " " << cj::engine_name(e.engine) << " rep " << e.rep;
    if (e.report) os << ": mu " << rate(e.report->mu);
    if (e.error) os << ": " << *e.error;
    progress(os.str());
  };
}

std::vector<cj::JoinedRecord> sorted(std::vector<cj::JoinedRecord> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// ---- Shared state between criteria ------------------------------------------

struct Shared {
  // Exact-correctness runs over the small relation.
  bool small_done = false;
  std::filesystem::path small_master;
  std::vector<cj::StreamRecord> small_stream;
  std::vector<cj::JoinedRecord> oracle;
  std::map<cj::EngineKind, cj::RunReport> small_reports;
  std::map<cj::EngineKind, double> small_seconds;

  // Desk-scale repetitions.
  bool desk_done = false;
  cj::ExperimentConfig desk;
  std::filesystem::path desk_master;
  std::vector<cj::CellResult> desk_cells;
  std::vector<std::vector<cj::RunReport>> desk_reports;  // per engine, per rep
};

cj::ExperimentConfig base_config(const Options& o) {
  cj::ExperimentConfig c = cj::desk_preset();
  c.work_dir = o.work_dir;
  c.read_mode = cj::ReadMode::kDirect;
  c.reps = o.reps;
  c.stream_records = 2000000;
  c.duration_s = o.sweep_seconds;
  c.warmup = 100;
  return c;
}

cj::EngineConfig small_engine_config(const Shared& s, cj::EngineKind engine) {
  cj::EngineConfig c;
  c.engine = engine;
  c.master_path = s.small_master;
  c.read_mode = cj::ReadMode::kDirect;
  c.stream.replay = std::make_shared<const std::vector<cj::StreamRecord>>(s.small_stream);
  c.stream_records = s.small_stream.size();
  c.warmup_iterations = 0;
  c.collect_outputs = true;
  c.deep_structure_checks = true;
  return c;
}

void ensure_small(const Options& o, Shared& s) {
  if (s.small_done) return;
  cj::ExperimentConfig c = base_config(o);
  c.r_size = 10000;
  s.small_master = cj::ensure_master(c);
  cj::ZipfSpec spec;
  spec.exponent = 1.0;
  spec.seed = 2026;
  cj::ZipfGenerator gen(spec, cj::KeySpace::of(cj::MasterStore::open(s.small_master)));
  s.small_stream = gen.next_batch(100000);
  const auto replay = o.work_dir / "replay_100k.bin";
  cj::write_stream_file(replay, s.small_stream);
  s.small_stream = cj::read_stream_file(replay);
  s.oracle = sorted(cj::oracle_join(s.small_master, s.small_stream));
  for (cj::EngineKind e : kEngines) {
    progress(std::string("exact join: ") + cj::engine_name(e));
    const auto t0 = Clock::now();
    cj::RunReport r = cj::run_engine(small_engine_config(s, e));
    s.small_seconds[e] = seconds_since(t0);
    r.outputs = sorted(std::move(r.outputs));
    s.small_reports[e] = std::move(r);
  }
  s.small_done = true;
}

void ensure_desk(const Options& o, Shared& s) {
  if (s.desk_done) return;
  s.desk = base_config(o);
  s.desk.r_size = 500000;
  s.desk.memory_bytes = 20u << 20;
  s.desk.zipf = 1.0;
  s.desk.duration_s = o.desk_seconds;
  s.desk_master = cj::ensure_master(s.desk);
  s.desk.master = s.desk_master;
  s.desk_cells = cj::run_engines(s.desk, {std::begin(kEngines), std::end(kEngines)}, "desk",
                                 progress_fn("desk"), &s.desk_reports);
  s.desk_done = true;
}

const cj::CellResult& cell(const Shared& s, cj::EngineKind e) {
  for (const auto& c : s.desk_cells) {
    if (c.engine == e) return c;
  }
  throw std::logic_error("no desk cell");
}

const std::vector<cj::RunReport>& desk_reports(const Shared& s, cj::EngineKind e) {
  return s.desk_reports.at(static_cast<std::size_t>(e));
}

double mean_of(const std::vector<cj::RunReport>& rs, double cj::RunReport::*field) {
  double sum = 0;
  for (const auto& r : rs) sum += r.*field;
  return rs.empty() ? 0 : sum / double(rs.size());
}

std::string describe_cell(const Shared& s, cj::EngineKind e) {
  const auto& c = cell(s, e);
  const auto& rs = desk_reports(s, e);
  std::ostringstream os;
  os << cj::engine_name(e) << ": mu " << rate(c.mu_mean) << " (std " << fmt("%.0f", c.mu_std)
     << "; reps";
  for (const auto& r : rs) os << " " << fmt("%.0f", r.mu);
  os << "), omega_n " << fmt("%.1f", c.omega_n_mean) << ", omega_s " << fmt("%.1f", c.omega_s_mean)
     << ", c_loop " << fmt("%.1f", c.c_loop_mean_s * 1e6) << " us, load "
     << fmt("%.1f", mean_of(rs, &cj::RunReport::mean_load_ns) / 1e3) << " us, stall "
     << fmt("%.1f", c.dp_stall_ns / 1e3) << " us, dp "
     << fmt("%.1f", mean_of(rs, &cj::RunReport::mean_dp_ns) / 1e3) << " us, hit ratio "
     << fmt("%.3f", c.cache_hit_ratio) << ", h_s " << (rs.empty() ? 0 : rs[0].budget.h_s)
     << ", iterations " << c.included_iterations;
  return os.str();
}

// ---- Criteria ------------------------------------------------------------------

Verdict exact_correctness(const Options& o, Shared& s) {
  Verdict v{1, "exact join correctness against the oracle (R=10k, 100k replayed records)"};
  ensure_small(o, s);
  v.pass = s.oracle.size() == s.small_stream.size();  // no orphans: every record joins
  v.details.push_back("oracle outputs: " + std::to_string(s.oracle.size()));
  for (cj::EngineKind e : kEngines) {
    const auto& r = s.small_reports.at(e);
    const bool same = r.outputs == s.oracle;
    const bool fast = s.small_seconds.at(e) <= 60;
    v.pass = v.pass && same && fast && r.orphan_count == 0;
    v.details.push_back(std::string(cj::engine_name(e)) + ": " + std::to_string(r.output_count) +
                        " outputs, " + (same ? "identical to" : "DIFFERENT from") +
                        " the oracle multiset, " + fmt("%.2f", s.small_seconds.at(e)) + " s");
  }
  v.summary = v.pass ? "all engines reproduce the oracle multiset within 60 s"
                     : "an engine diverged from the oracle or exceeded 60 s";
  return v;
}

Verdict equivalence(const Options& o, Shared& s) {
  Verdict v{2, "engine equivalence and repeatability (5 runs per parallel engine)"};
  ensure_small(o, s);
  const auto& reference = s.small_reports.at(cj::EngineKind::kCacheJoin).outputs;
  v.pass = true;
  for (cj::EngineKind e : kEngines) {
    const bool same = s.small_reports.at(e).outputs == reference;
    v.pass = v.pass && same;
    v.details.push_back(std::string(cj::engine_name(e)) + " vs cachejoin: " +
                        (same ? "identical" : "DIFFERENT"));
  }
  for (cj::EngineKind e : {cj::EngineKind::kPCacheJoin, cj::EngineKind::kOpCacheJoin}) {
    int identical = 0;
    for (int run = 0; run < 5; ++run) {
      progress(std::string("repeat ") + cj::engine_name(e) + " run " + std::to_string(run + 1));
      identical += sorted(cj::run_engine(small_engine_config(s, e)).outputs) == reference;
    }
    v.pass = v.pass && identical == 5;
    v.details.push_back(std::string(cj::engine_name(e)) + ": " + std::to_string(identical) +
                        "/5 repeated runs identical");
  }
  v.summary = v.pass ? "identical output multisets everywhere" : "output multisets differ";
  return v;
}

Verdict desk_ordering(const Options& o, Shared& s) {
  Verdict v{3, "desk-scale ordering mu(OP) > mu(P) > mu(CJ), gaps >= 5% (R=500k, M=20MB)"};
  ensure_desk(o, s);
  const double cjm = cell(s, cj::EngineKind::kCacheJoin).mu_mean;
  const double pm = cell(s, cj::EngineKind::kPCacheJoin).mu_mean;
  const double opm = cell(s, cj::EngineKind::kOpCacheJoin).mu_mean;
  const double gap_p = cjm > 0 ? pm / cjm - 1 : 0;
  const double gap_op = pm > 0 ? opm / pm - 1 : 0;
  v.pass = gap_p >= 0.05 && gap_op >= 0.05;
  v.summary = "P over CJ " + fmt("%+.1f%%", 100 * gap_p) + ", OP over P " +
              fmt("%+.1f%%", 100 * gap_op);
  for (cj::EngineKind e : kEngines) v.details.push_back(describe_cell(s, e));
  if (gap_p < 0.05) {
    const auto& c = cell(s, cj::EngineKind::kCacheJoin);
    const auto& p = cell(s, cj::EngineKind::kPCacheJoin);
    v.details.push_back(
        "diagnostic P vs CJ: matches per iteration " +
        fmt("%.1f", p.omega_n_mean + p.omega_s_mean) + " vs " +
        fmt("%.1f", c.omega_n_mean + c.omega_s_mean) + "; c_loop " +
        fmt("%.1f", p.c_loop_mean_s * 1e6) + " vs " + fmt("%.1f", c.c_loop_mean_s * 1e6) +
        " us; the intermediate buffer takes " +
        std::to_string(desk_reports(s, cj::EngineKind::kPCacheJoin)[0].budget.i_b) +
        " records of memory from H_S");
  }
  if (gap_op < 0.05) {
    const auto& p = cell(s, cj::EngineKind::kPCacheJoin);
    const auto& op = cell(s, cj::EngineKind::kOpCacheJoin);
    v.details.push_back("diagnostic OP vs P: stall " + fmt("%.1f", op.dp_stall_ns / 1e3) +
                        " us vs synchronous load " + fmt("%.1f", p.load_ns / 1e3) +
                        " us; c_loop " + fmt("%.1f", op.c_loop_mean_s * 1e6) + " vs " +
                        fmt("%.1f", p.c_loop_mean_s * 1e6) + " us");
  }
  return v;
}

// Mean mu per engine at each sweep point, in sweep order.
std::map<cj::EngineKind, std::vector<double>> series(const cj::SweepResult& r,
                                                     std::vector<std::string>* errors) {
  std::map<cj::EngineKind, std::vector<double>> out;
  for (const auto& row : r.rows) {
    if (row.error) errors->push_back(row.axis_value + " " + cj::engine_name(row.engine) + ": " +
                                     *row.error);
    out[row.engine].push_back(row.error ? std::nan("") : row.mu_mean);
  }
  return out;
}

std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt("%.0f", x);
  return s;
}

Verdict trends(const Options& o, Shared& s) {
  Verdict v{4, "trends: rho(|R|, mu) <= 0 per engine; mu non-decreasing over M"};
  (void)s;
  v.pass = true;
  std::vector<std::string> errors;

  cj::ExperimentConfig rc = base_config(o);
  rc.memory_bytes = 20u << 20;
  const std::vector<double> r_values = {100000, 250000, 500000, 1000000};
  const cj::SweepResult rs = cj::run_sweep(rc, cj::SweepAxis::kRSize, r_values, progress_fn("rsize"));
  std::string rho_summary;
  for (const auto& [engine, mus] : series(rs, &errors)) {
    const double rho = cj::spearman_rho(r_values, mus);
    const bool ok = rho <= 0 && std::none_of(mus.begin(), mus.end(), [](double m) { return std::isnan(m); });
    v.pass = v.pass && ok;
    rho_summary += std::string(rho_summary.empty() ? "" : ", ") + cj::engine_name(engine) +
                   " rho " + fmt("%.2f", rho);
    v.details.push_back(std::string("R sweep ") + cj::engine_name(engine) + ": mu " +
                        join_values(mus) + " at R = 100k, 250k, 500k, 1M; rho " +
                        fmt("%.3f", rho) + (ok ? "" : "  <-- violates"));
  }

  cj::ExperimentConfig mc = base_config(o);
  mc.r_size = 500000;
  const std::vector<double> m_values = {10, 20, 40, 80};
  const cj::SweepResult ms = cj::run_sweep(mc, cj::SweepAxis::kMemory, m_values, progress_fn("memory"));
  std::string steps_summary;
  for (const auto& [engine, mus] : series(ms, &errors)) {
    int decreases = 0;
    std::string steps;
    for (std::size_t i = 1; i < mus.size(); ++i) {
      const double step = mus[i] / mus[i - 1] - 1;
      decreases += !(mus[i] >= mus[i - 1]);
      steps += (steps.empty() ? "" : ", ") + fmt("%+.1f%%", 100 * step);
    }
    const double rho = cj::spearman_rho(m_values, mus);
    v.pass = v.pass && decreases == 0;
    steps_summary += std::string(steps_summary.empty() ? "" : ", ") + cj::engine_name(engine) +
                     " " + std::to_string(decreases) + " decreases";
    v.details.push_back(std::string("memory sweep ") + cj::engine_name(engine) + ": mu " +
                        join_values(mus) + " at M = 10, 20, 40, 80 MB; steps " + steps +
                        "; rho " + fmt("%.3f", rho) + (decreases ? "  <-- decreases" : ""));
  }
  for (const auto& e : errors) v.details.push_back("error: " + e);
  v.pass = v.pass && errors.empty();
  v.summary = rho_summary + "; memory: " + steps_summary;
  return v;
}

Verdict ib_tuning(const Options& o, Shared& s) {
  Verdict v{5, "i_B tuning: maximum interior or at 2 MB, mu(8 MB) >= 3% below it (P, R=500k, M=20MB)"};
  (void)s;
  cj::ExperimentConfig c = base_config(o);
  c.r_size = 500000;
  c.memory_bytes = 20u << 20;
  c.engines = {cj::EngineKind::kPCacheJoin};
  const std::vector<double> values = {0.25, 0.5, 1, 2, 4, 8};
  const cj::SweepResult r = cj::run_sweep(c, cj::SweepAxis::kIb, values, progress_fn("i_b"));
  std::vector<std::string> errors;
  const auto mus = series(r, &errors)[cj::EngineKind::kPCacheJoin];
  if (!errors.empty() || mus.size() != values.size()) {
    v.summary = "sweep failed";
    v.details = errors;
    return v;
  }
  const std::size_t best = std::max_element(mus.begin(), mus.end()) - mus.begin();
  const bool interior = (best > 0 && best + 1 < mus.size()) || values[best] == 2;
  const double drop = 1 - mus.back() / mus[best];
  v.pass = interior && drop >= 0.03;
  v.summary = "maximum at " + fmt("%g", values[best]) + " MB, 8 MB is " +
              fmt("%.1f%%", 100 * drop) + " below it";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& row = r.rows[i];
    v.details.push_back("i_B " + fmt("%g", values[i]) + " MB: mu " + rate(row.mu_mean) + " (std " +
                        fmt("%.0f", row.mu_std) + "), omega_n " + fmt("%.1f", row.omega_n_mean) +
                        ", omega_s " + fmt("%.1f", row.omega_s_mean) + ", c_loop " +
                        fmt("%.1f", row.c_loop_mean_s * 1e6) + " us");
  }
  return v;
}

Verdict overlap(const Options& o, Shared& s) {
  Verdict v{6, "OP mean DP stall <= 0.6 x P mean synchronous load (desk scale)"};
  ensure_desk(o, s);
  const double stall = cell(s, cj::EngineKind::kOpCacheJoin).dp_stall_ns;
  const double load = mean_of(desk_reports(s, cj::EngineKind::kPCacheJoin),
                              &cj::RunReport::mean_load_ns);
  v.pass = load > 0 && stall <= 0.6 * load;
  v.summary = "OP stall " + fmt("%.1f", stall / 1e3) + " us vs P load " + fmt("%.1f", load / 1e3) +
              " us (ratio " + fmt("%.2f", load > 0 ? stall / load : 0) + ")";
  v.details.push_back("OP mean load per buffer " +
                      fmt("%.1f", cell(s, cj::EngineKind::kOpCacheJoin).load_ns / 1e3) + " us");
  return v;
}

Verdict cost_model(const Options& o, Shared& s) {
  Verdict v{7, "calibrated cost model within +-30% of measured c_loop and mu (P and OP)"};
  ensure_desk(o, s);
  progress("calibrating");
  cj::CalibrationOptions co;
  co.master_path = s.desk_master;
  co.read_mode = cj::ReadMode::kDirect;
  co.d_b_values = {s.desk.d_b};
  const cj::Calibration cal = cj::calibrate(co);
  {
    std::ostringstream k;
    cj::write_constants(k, cal.constants);
    std::string line;
    std::istringstream in(k.str());
    std::string joined;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') joined += (joined.empty() ? "" : " ") + line;
    }
    v.details.push_back("constants (ns): " + joined);
    for (const auto& w : cal.warnings) v.details.push_back("calibration warning: " + w);
  }
  v.pass = true;
  double worst = 0;
  for (cj::EngineKind e : {cj::EngineKind::kPCacheJoin, cj::EngineKind::kOpCacheJoin}) {
    for (const auto& r : desk_reports(s, e)) {
      const auto pred = cj::predict_c_loop(cal.constants, r.budget.d_b, r.mean_omega_n,
                                           r.mean_omega_s, cj::cost_variant_for(e));
      const auto cmp = cj::compare(pred, r);
      const bool enough = r.included_iterations >= 1000;
      const bool ok = enough && cmp.c_loop_error <= 0.30 && cmp.mu_error <= 0.30;
      worst = std::max({worst, cmp.c_loop_error, cmp.mu_error});
      v.pass = v.pass && ok;
      v.details.push_back(std::string(cj::engine_name(e)) + ": c_loop predicted " +
                          fmt("%.1f", pred.c_loop * 1e6) + " us vs measured " +
                          fmt("%.1f", r.mean_c_loop_s * 1e6) + " us (" +
                          fmt("%.1f%%", 100 * cmp.c_loop_error) + "), mu predicted " +
                          rate(pred.mu) + " vs " + rate(r.mu) + " (" +
                          fmt("%.1f%%", 100 * cmp.mu_error) + "), " +
                          std::to_string(r.included_iterations) + " iterations" +
                          (ok ? "" : "  <-- outside"));
    }
  }
  v.summary = "worst relative error " + fmt("%.1f%%", 100 * worst);
  return v;
}

Verdict budgets(const Options&, Shared&) {
  Verdict v{8, "1000 random budgets: components + slack = M, slack < 164 B, under 1 s"};
  std::mt19937_64 rng(8);
  const auto t0 = Clock::now();
  int planned = 0, refused = 0, bad = 0;
  std::uint64_t max_slack = 0;
  for (int i = 0; i < 1000; ++i) {
    cj::BudgetRequest req;
    req.total_bytes = (1u << 20) + rng() % (512ull << 20);
    req.d_b = 1 + rng() % 4000;
    req.n_disk_buffers = 1 + static_cast<std::uint32_t>(rng() % 2);
    req.h_r = rng() % 20000;
    req.i_b_bytes = rng() % (8u << 20);
    if (rng() % 2) req.alpha = 0.05 + 0.9 * double(rng() % 1000) / 1000.0;
    try {
      const cj::MemoryBudget b = cj::plan_budget(req);
      ++planned;
      const std::uint64_t sum = b.disk_buffer_bytes() + b.cache_bytes() + b.intermediate_bytes() +
                                b.stream_store_bytes() + b.queue_bytes() + b.slack_bytes();
      bad += sum != req.total_bytes || b.slack_bytes() >= 164;
      max_slack = std::max(max_slack, b.slack_bytes());
    } catch (const cj::Error& e) {
      bad += e.code() != cj::ErrorCode::kInsufficientMemory;
      ++refused;
    }
  }
  const double secs = seconds_since(t0);
  v.pass = bad == 0 && planned >= 900 && secs < 1;
  v.summary = std::to_string(planned) + " planned, " + std::to_string(refused) +
              " refused as insufficient, " + std::to_string(bad) + " inconsistent, max slack " +
              std::to_string(max_slack) + " B, " + fmt("%.3f", secs) + " s";
  return v;
}

Verdict structures(const Options& o, Shared& s) {
  Verdict v{9, "|H_S| = |Q| every iteration; status machine stress; I_B FIFO under 10^6 records"};
  ensure_small(o, s);
  std::uint64_t violations = 0, iterations = 0;
  for (const auto& [e, r] : s.small_reports) {
    violations += r.structure_violations;
    iterations += r.iterations.size();
  }
  // The desk-scale runs check the size equality (not the full linkage walk).
  if (s.desk_done) {
    for (const auto& per_engine : s.desk_reports) {
      for (const auto& r : per_engine) {
        violations += r.structure_violations;
        iterations += r.iterations.size();
      }
    }
  }
  progress("status machine stress");
  const auto stress = cj::testing::run_status_machine_stress(100000);
  progress("intermediate buffer FIFO");
  const auto fifo = cj::testing::run_fifo_stress(1000000, 2000);
  v.pass = violations == 0 && iterations > 0 && stress.transitions >= 100000 && stress.clean() &&
           fifo.received == 1000000 && fifo.out_of_order == 0;
  v.summary = std::to_string(violations) + " structure violations in " +
              std::to_string(iterations) + " checked iterations; " +
              std::to_string(stress.illegal_accepted) + " illegal edges accepted in " +
              std::to_string(stress.transitions) + " transitions; " +
              std::to_string(fifo.out_of_order) + " FIFO inversions in " +
              std::to_string(fifo.received) + " records";
  v.details.push_back("stress: " + std::to_string(stress.illegal_refused) +
                      " illegal attempts refused, " + std::to_string(stress.ownership_violations) +
                      " ownership violations, loads " + std::to_string(stress.loads_done) +
                      ", probes " + std::to_string(stress.probes_done));
  return v;
}

Verdict zipf(const Options&, Shared&) {
  Verdict v{10, "Zipf sampler: rank1/rank10 = 10 +-15% (s=1); chi-square uniformity (s=0)"};
  cj::ZipfSpec spec;
  spec.exponent = 1.0;
  spec.seed = 10;
  cj::ZipfGenerator g(spec, cj::KeySpace::dense(10000));
  std::vector<std::uint64_t> counts(10001);
  for (int i = 0; i < 1000000; ++i) ++counts[g.next().fkey];
  const double ratio = double(counts[1]) / double(counts[10]);

  // 100 keys, 99 degrees of freedom; 134.642 is the tabulated 0.99 quantile.
  spec.exponent = 0.0;
  spec.seed = 11;
  cj::ZipfGenerator u(spec, cj::KeySpace::dense(100));
  std::vector<double> uc(100);
  constexpr int kSamples = 1000000;
  for (int i = 0; i < kSamples; ++i) ++uc[u.next().fkey - 1];
  double chi2 = 0;
  for (double c : uc) chi2 += (c - kSamples / 100.0) * (c - kSamples / 100.0) / (kSamples / 100.0);
  v.pass = std::abs(ratio - 10) <= 1.5 && chi2 < 134.642;
  v.summary = "rank1/rank10 " + fmt("%.3f", ratio) + "; chi-square " + fmt("%.1f", chi2) +
              " (critical 134.642 at 0.01, 99 df)";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Measures every acceptance criterion and prints one PASS/FAIL line each"};
  app.add_option("--work-dir", o.work_dir, "Directory for generated relations (reused)");
  app.add_option("--desk-seconds", o.desk_seconds, "Seconds per run at desk scale");
  app.add_option("--sweep-seconds", o.sweep_seconds, "Seconds per run in the sweeps");
  app.add_option("--reps", o.reps, "Repetitions per configuration");
  app.add_option("--only", o.only, "Run only these criteria (1-10)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(o.work_dir);
  const std::vector<std::function<Verdict(const Options&, Shared&)>> criteria = {
      exact_correctness, equivalence, desk_ordering, trends,     ib_tuning,
      overlap,           cost_model,  budgets,       structures, zipf};

  Shared shared;
  std::vector<Verdict> verdicts;
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!o.only.empty() && std::find(o.only.begin(), o.only.end(), id) == o.only.end()) continue;
    try {
      verdicts.push_back(criteria[i](o, shared));
    } catch (const std::exception& e) {
      Verdict v{id, "criterion " + std::to_string(id)};
      v.summary = std::string("error: ") + e.what();
      verdicts.push_back(v);
    }
    progress("criterion " + std::to_string(id) + " done after " +
             fmt("%.0f", seconds_since(t0)) + " s");
  }

  int failed = 0;
  for (const auto& v : verdicts) {
    std::printf("%s %2d  %s: %s\n", v.pass ? "PASS" : "FAIL", v.id, v.title.c_str(),
                v.summary.c_str());
    failed += !v.pass;
  }
  std::printf("\n");
  for (const auto& v : verdicts) {
    if (v.details.empty()) continue;
    std::printf("criterion %d:\n", v.id);
    for (const auto& d : v.details) std::printf("  %s\n", d.c_str());
  }
  std::printf("\n%zu criteria, %d failed, %.0f s\n", verdicts.size(), failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
