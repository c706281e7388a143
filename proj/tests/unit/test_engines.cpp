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

#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "cachejoin/engine.hpp"
#include "cachejoin/error.hpp"
#include "test_util.hpp"

namespace cachejoin {
namespace {

using testing::small_config;
using testing::sorted;
using testing::stream_record;
using testing::TempDir;

const EngineKind kAllEngines[] = {EngineKind::kCacheJoin, EngineKind::kPCacheJoin,
                                  EngineKind::kOpCacheJoin};

std::vector<StreamRecord> zipf_stream(const std::filesystem::path& master, std::size_t n,
                                      double exponent, std::uint64_t seed, double orphans = 0) {
  ZipfSpec spec;
  spec.exponent = exponent;
  spec.seed = seed;
  spec.orphan_rate = orphans;
  ZipfGenerator g(spec, KeySpace::of(MasterStore::open(master)));
  return g.next_batch(n);
}

class EngineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    master_ = dir_ / "m.bin";
    generate_master(master_, 3000, 9);
  }
  TempDir dir_;
  std::filesystem::path master_;
};

// ---- Per-phase steps -------------------------------------------------------

TEST_F(EngineTest, EmptyCacheMissesEverything) {
  JoinState st(100, 10, {});
  OutputSink sink(true, nullptr);
  std::vector<StreamRecord> batch = {stream_record(1, 0), stream_record(2, 0)}, misses;
  EXPECT_EQ(st.sp_step(batch, sink, misses), 0u);
  EXPECT_EQ(misses, batch);
  EXPECT_EQ(sink.count(), 0u);
}

TEST_F(EngineTest, CachedKeyHitsEveryOccurrence) {
  const MasterStore store = MasterStore::open(master_);
  JoinState st(100, 10, {});
  st.cache().promote(*store.find(7), 3);
  OutputSink sink(true, nullptr);
  std::vector<StreamRecord> batch = {stream_record(7, 0), stream_record(8, 0), stream_record(7, 1),
                                     stream_record(9, 0), stream_record(7, 2)};
  std::vector<StreamRecord> misses;
  EXPECT_EQ(st.sp_step(batch, sink, misses), 3u);
  EXPECT_EQ(misses.size(), 2u);
  EXPECT_EQ(sink.count(), 3u);
  // The emitted master payload is the file's record for the key.
  for (const auto& out : sink.collected()) {
    EXPECT_EQ(out.fkey(), 7u);
    EXPECT_TRUE(std::equal(out.master_payload().begin(), out.master_payload().end(),
                           store.find(7)->payload.begin()));
  }
}

TEST_F(EngineTest, PrePromotedKeysNeverReachTheStreamStore) {
  const MasterStore store = MasterStore::open(master_);
  JoinState st(100, 64, {});
  for (JoinKey k = 1; k <= 50; ++k) st.cache().promote(*store.find(k), 3);
  OutputSink sink(false, nullptr);
  std::vector<StreamRecord> batch, misses;
  for (int i = 0; i < 1000; ++i) batch.push_back(stream_record(1 + i % 50, i));
  EXPECT_EQ(st.sp_step(batch, sink, misses), 1000u);
  EXPECT_TRUE(misses.empty());
  EXPECT_EQ(sink.count(), 1000u);
}

TEST_F(EngineTest, DisjointPartitionMatchesNothing) {
  const MasterStore store = MasterStore::open(master_);
  JoinState st(100, 10, {});
  st.stream_store().insert(stream_record(2000, 0));
  OutputSink sink(false, nullptr);
  const DpResult r = st.dp_step(store.read_partition(1, 850), sink);
  EXPECT_EQ(r.matched, 0u);
  EXPECT_EQ(r.promotions, 0u);
}

TEST_F(EngineTest, ThreeMatchesAboveThresholdPromote) {
  const MasterStore store = MasterStore::open(master_);
  JoinState st(100, 10, {2, false, true});
  for (int i = 0; i < 3; ++i) st.stream_store().insert(stream_record(5, i));
  st.stream_store().insert(stream_record(6, 0));
  OutputSink sink(false, nullptr);
  const DpResult r = st.dp_step(store.read_partition(1, 850), sink);
  EXPECT_EQ(r.matched, 4u);
  EXPECT_EQ(r.promotions, 1u);
  EXPECT_TRUE(st.cache().contains(5));
  EXPECT_FALSE(st.cache().contains(6));
  EXPECT_TRUE(st.stream_store().empty());
}

TEST_F(EngineTest, OrphanDroppedOnSecondMiss) {
  JoinState st(100, 10, {});
  st.stream_store().insert(stream_record(9999, 0));
  EXPECT_EQ(st.orphan_check(9999), 0u);
  EXPECT_EQ(st.orphan_check(9999), 1u);
  EXPECT_TRUE(st.stream_store().empty());
  st.stream_store().insert(stream_record(9999, 1));
  EXPECT_EQ(st.orphan_check(9999, true), 1u);
}

// ---- Whole engines ------------------------------------------------------------

TEST_F(EngineTest, EveryEngineMatchesTheOracle) {
  const auto stream = zipf_stream(master_, 30000, 1.0, 3);
  const auto want = sorted(oracle_join(master_, stream));
  ASSERT_EQ(want.size(), stream.size());
  for (EngineKind e : kAllEngines) {
    const RunReport r = run_engine(small_config(e, master_, stream));
    EXPECT_EQ(sorted(r.outputs), want) << engine_name(e);
    EXPECT_EQ(r.output_count, want.size());
    EXPECT_EQ(r.stream_consumed, stream.size());
    EXPECT_EQ(r.structure_violations, 0u);
    EXPECT_GT(r.cache_hits, 0u) << engine_name(e);
  }
}

TEST_F(EngineTest, OrphansAreDroppedAndCounted) {
  const auto stream = zipf_stream(master_, 20000, 0.8, 4, 0.05);
  const MasterStore store = MasterStore::open(master_);
  std::uint64_t orphan_records = 0;
  for (const auto& s : stream) orphan_records += !store.contains_key(s.fkey);
  ASSERT_GT(orphan_records, 0u);
  const auto want = sorted(oracle_join(master_, stream));
  for (EngineKind e : kAllEngines) {
    const RunReport r = run_engine(small_config(e, master_, stream));
    EXPECT_EQ(sorted(r.outputs), want) << engine_name(e);
    EXPECT_EQ(r.orphan_count, orphan_records) << engine_name(e);
  }
}

TEST_F(EngineTest, OneRecordIntermediateBufferStillTerminates) {
  const auto stream = zipf_stream(master_, 5000, 1.0, 5);
  const auto want = sorted(oracle_join(master_, stream));
  for (EngineKind e : {EngineKind::kPCacheJoin, EngineKind::kOpCacheJoin}) {
    auto cfg = small_config(e, master_, stream);
    cfg.budget.i_b_bytes = kStreamRecordSize;
    const RunReport r = run_engine(cfg);
    EXPECT_EQ(r.budget.i_b, 1u);
    EXPECT_EQ(sorted(r.outputs), want) << engine_name(e);
  }
}

TEST_F(EngineTest, EmptyStreamGivesEmptyReport) {
  for (EngineKind e : kAllEngines) {
    const RunReport r = run_engine(small_config(e, master_, {}));
    EXPECT_EQ(r.output_count, 0u);
    EXPECT_EQ(r.stream_consumed, 0u);
    EXPECT_EQ(r.mu, 0.0);
  }
}

TEST_F(EngineTest, TinyStreams) {
  const MasterStore store = MasterStore::open(master_);
  for (EngineKind e : kAllEngines) {
    EXPECT_EQ(run_engine(small_config(e, master_, {stream_record(17, 0)})).output_count, 1u);
    const RunReport orphan = run_engine(small_config(e, master_, {stream_record(50000, 0)}));
    EXPECT_EQ(orphan.output_count, 0u);
    EXPECT_EQ(orphan.orphan_count, 1u);
    const RunReport dup =
        run_engine(small_config(e, master_, {stream_record(17, 0), stream_record(17, 1)}));
    ASSERT_EQ(dup.outputs.size(), 2u);
    EXPECT_TRUE(std::equal(dup.outputs[0].master_payload().begin(),
                           dup.outputs[0].master_payload().end(),
                           dup.outputs[1].master_payload().begin()));
  }
}

TEST_F(EngineTest, SequentialEngineIsDeterministic) {
  const auto stream = zipf_stream(master_, 20000, 1.0, 6);
  const RunReport a = run_engine(small_config(EngineKind::kCacheJoin, master_, stream));
  const RunReport b = run_engine(small_config(EngineKind::kCacheJoin, master_, stream));
  EXPECT_EQ(sorted(a.outputs), sorted(b.outputs));
  ASSERT_EQ(a.iterations.size(), b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    EXPECT_EQ(a.iterations[i].omega_n, b.iterations[i].omega_n);
    EXPECT_EQ(a.iterations[i].omega_s, b.iterations[i].omega_s);
  }
  EXPECT_EQ(a.cache_hits, b.cache_hits);
}

TEST_F(EngineTest, ParallelEnginesRepeatTheSameMultiset) {
  const auto stream = zipf_stream(master_, 20000, 1.0, 7);
  for (EngineKind e : {EngineKind::kPCacheJoin, EngineKind::kOpCacheJoin}) {
    const auto first = sorted(run_engine(small_config(e, master_, stream)).outputs);
    for (int rep = 0; rep < 3; ++rep) {
      EXPECT_EQ(sorted(run_engine(small_config(e, master_, stream)).outputs), first);
    }
  }
}

TEST_F(EngineTest, UnreachableThresholdKeepsTheCacheEmpty) {
  ZipfSpec spec;
  spec.exponent = 0.0;
  ZipfGenerator g(spec, KeySpace::of(MasterStore::open(master_)));
  const auto stream = g.next_batch(20000);
  for (EngineKind e : kAllEngines) {
    auto cfg = small_config(e, master_, stream);
    cfg.threshold = std::numeric_limits<std::uint64_t>::max();
    const RunReport r = run_engine(cfg);
    EXPECT_EQ(r.promotions, 0u);
    EXPECT_EQ(r.cache_hits, 0u);
    EXPECT_EQ(sorted(r.outputs), sorted(oracle_join(master_, stream)));
  }
}

TEST_F(EngineTest, OverlappingBuffersNeverDuplicateOutputs) {
  // A relation smaller than two partitions makes the buffers overlap.
  const auto small = dir_ / "small.bin";
  generate_master(small, 1200, 2);
  const auto stream = zipf_stream(small, 30000, 1.0, 8);
  auto cfg = small_config(EngineKind::kOpCacheJoin, small, stream);
  const RunReport r = run_engine(cfg);
  std::map<std::uint64_t, int> emitted;  // stream sequence number -> outputs
  for (const auto& o : r.outputs) ++emitted[load_be64(o.stream_payload().data())];
  for (const auto& [seq, n] : emitted) ASSERT_EQ(n, 1) << "stream record " << seq;
  EXPECT_EQ(emitted.size(), stream.size());
}

TEST_F(EngineTest, ServiceRateMatchesTheIterationLog) {
  const auto stream = zipf_stream(master_, 60000, 1.0, 9);
  for (EngineKind e : kAllEngines) {
    // Small partitions and a small H_S give many iterations before the
    // stream runs out.
    auto cfg = small_config(e, master_, stream, 1u << 20);
    cfg.budget.d_b = 100;
    cfg.budget.i_b_bytes = 16u << 10;
    cfg.warmup_iterations = 5;
    cfg.collect_outputs = false;
    const RunReport r = run_engine(cfg);
    double out = 0, loop = 0;
    std::uint64_t n = 0;
    for (const auto& it : r.iterations) {
      if (it.warmup || it.draining) continue;
      out += double(it.omega_n + it.omega_s);
      loop += double(it.loop_ns);
      ++n;
    }
    ASSERT_GT(n, 0u) << engine_name(e);
    EXPECT_EQ(n, r.included_iterations);
    EXPECT_NEAR(r.mu, out / (loop * 1e-9), 1e-6 * r.mu) << engine_name(e);
    std::uint64_t total = 0;
    for (const auto& it : r.iterations) total += it.omega_n + it.omega_s;
    EXPECT_EQ(total, r.output_count) << engine_name(e);
  }
}

TEST_F(EngineTest, FileSinkHoldsEveryJoinedRecord) {
  const auto stream = zipf_stream(master_, 8000, 1.0, 10);
  for (EngineKind e : kAllEngines) {
    auto cfg = small_config(e, master_, stream);
    cfg.sink_path = dir_ / "out.bin";
    const RunReport r = run_engine(cfg);
    const auto bytes = testing::read_bytes(dir_ / "out.bin");
    ASSERT_EQ(bytes.size(), r.output_count * kJoinedRecordSize);
    std::vector<JoinedRecord> from_file(r.output_count);
    for (std::size_t i = 0; i < from_file.size(); ++i) {
      std::memcpy(from_file[i].bytes.data(), bytes.data() + i * kJoinedRecordSize, kJoinedRecordSize);
    }
    EXPECT_EQ(sorted(from_file), sorted(r.outputs)) << engine_name(e);
  }
}

TEST_F(EngineTest, TimedRunStops) {
  ZipfSpec spec;
  EngineConfig cfg;
  cfg.master_path = master_;
  cfg.read_mode = ReadMode::kBuffered;
  cfg.budget.total_bytes = 4u << 20;
  cfg.stream_records = 20000;
  cfg.duration = std::chrono::milliseconds(300);
  for (EngineKind e : kAllEngines) {
    cfg.engine = e;
    const RunReport r = run_engine(cfg);
    EXPECT_GT(r.stream_consumed, 20000u) << "cyclic stream " << engine_name(e);
    EXPECT_LT(r.wall_seconds, 5.0);
  }
}

TEST_F(EngineTest, TooLittleMemoryNamesTheComponent) {
  auto cfg = small_config(EngineKind::kPCacheJoin, master_, {stream_record(1, 0)}, 1u << 20);
  cfg.budget.i_b_bytes = 2u << 20;
  try {
    run_engine(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientMemory);
    EXPECT_NE(std::string(e.what()).find("intermediate"), std::string::npos) << e.what();
  }
}

TEST_F(EngineTest, EmptyMasterRelationIsRejected) {
  generate_master(dir_ / "empty.bin", 0, 1);
  try {
    run_engine(small_config(EngineKind::kCacheJoin, dir_ / "empty.bin", {stream_record(1, 0)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyRelation);
  }
}

TEST(Report, WriteThenReadKeepsTheSummary) {
  RunReport r;
  r.engine = EngineKind::kOpCacheJoin;
  r.budget.d_b = 850;
  r.output_count = 12345;
  r.mu = 2.5e6;
  r.mean_c_loop_s = 1.234567e-4;
  r.mean_omega_n = 300.25;
  r.mean_omega_s = 80.5;
  r.warnings.push_back("note");
  std::stringstream ss;
  write_report(ss, r);
  const RunReport back = read_report(ss);
  EXPECT_EQ(back.engine, r.engine);
  EXPECT_EQ(back.budget.d_b, 850u);
  EXPECT_EQ(back.output_count, 12345u);
  EXPECT_DOUBLE_EQ(back.mu, r.mu);
  EXPECT_NEAR(back.mean_c_loop_s, r.mean_c_loop_s, 1e-15);
  EXPECT_DOUBLE_EQ(back.mean_omega_n, r.mean_omega_n);
  std::stringstream bad("engine=cachejoin\nbogus=1\n");
  EXPECT_THROW(read_report(bad), Error);
}

}  // namespace
}  // namespace cachejoin
