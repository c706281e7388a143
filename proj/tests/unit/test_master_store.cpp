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

#include <random>

#include "cachejoin/error.hpp"
#include "cachejoin/master_store.hpp"
#include "test_util.hpp"

namespace cachejoin {
namespace {

using testing::TempDir;

// Reference reader: decodes the file byte by byte, independent of the
// store's index and partition code.
struct RawMaster {
  std::vector<std::uint8_t> bytes;
  std::uint64_t count = 0;

  explicit RawMaster(const std::filesystem::path& p) : bytes(testing::read_bytes(p)) {
    count = load_be64(bytes.data() + 24);
  }
  const std::uint8_t* record(std::uint64_t i) const { return bytes.data() + 32 + i * 120; }
  JoinKey key(std::uint64_t i) const { return load_be32(record(i)); }

  // The expected cyclic window: linear scan for the first key >= start.
  std::vector<std::uint64_t> window(JoinKey start, std::size_t d_b) const {
    std::uint64_t first = 0;
    bool found = false;
    for (std::uint64_t i = 0; i < count; ++i) {
      if (key(i) >= start) {
        first = i;
        found = true;
        break;
      }
    }
    if (!found) first = 0;
    std::vector<std::uint64_t> out;
    for (std::uint64_t j = 0; j < std::min<std::uint64_t>(d_b, count); ++j) {
      out.push_back((first + j) % count);
    }
    return out;
  }
};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

void expect_window(const MasterStore& store, const RawMaster& raw, JoinKey start, std::size_t d_b) {
  const Partition p = store.read_partition(start, d_b);
  const auto want = raw.window(start, d_b);
  ASSERT_EQ(p.size(), want.size()) << "start " << start;
  for (std::size_t i = 0; i < want.size(); ++i) {
    ASSERT_EQ(0, std::memcmp(p.record_bytes(i), raw.record(want[i]), kMasterRecordSize))
        << "start " << start << " position " << i;
  }
}

class MasterFile : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    path_ = *dir_ / "m500k.bin";
    generate_master(path_, 500000, 42);
  }
  static void TearDownTestSuite() { delete dir_; }
  static TempDir* dir_;
  static std::filesystem::path path_;
};
TempDir* MasterFile::dir_ = nullptr;
std::filesystem::path MasterFile::path_;

TEST_F(MasterFile, BodyIsCountTimesRecordWidth) {
  const auto size = std::filesystem::file_size(path_);
  const std::uint64_t trailer = (500000 + 63) / 64 * kSparseIndexEntrySize;
  EXPECT_EQ(size - kMasterHeaderSize - trailer, 60000000u);
  EXPECT_EQ(size, master_file_size(500000));
}

TEST_F(MasterFile, OpenReportsRecordCount) {
  for (ReadMode mode : {ReadMode::kBuffered, ReadMode::kDirect}) {
    const MasterStore s = MasterStore::open(path_, mode);
    EXPECT_EQ(s.record_count(), 500000u);
    EXPECT_EQ(s.min_key(), 1u);
    EXPECT_EQ(s.max_key(), 500000u);
  }
}

TEST_F(MasterFile, PartitionFromFirstKey) {
  const MasterStore s = MasterStore::open(path_, ReadMode::kDirect);
  const Partition p = s.read_partition(1, 850);
  ASSERT_EQ(p.size(), 850u);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.key(i), i + 1);
  EXPECT_FALSE(p.wrapped());
}

TEST_F(MasterFile, PartitionsMatchLinearScan) {
  const RawMaster raw(path_);
  for (ReadMode mode : {ReadMode::kBuffered, ReadMode::kDirect}) {
    const MasterStore s = MasterStore::open(path_, mode);
    expect_window(s, raw, 500001, 850);  // past the largest key: wraps to key 1
    expect_window(s, raw, 499900, 850);
    expect_window(s, raw, 1, 850);
    expect_window(s, raw, 250000, 1);
  }
}

TEST_F(MasterFile, WrappingWindowKeys) {
  const MasterStore s = MasterStore::open(path_, ReadMode::kDirect);
  const Partition p = s.read_partition(499900, 850);
  ASSERT_EQ(p.size(), 850u);
  EXPECT_EQ(p.key(0), 499900u);
  EXPECT_EQ(p.key(100), 500000u);
  EXPECT_EQ(p.key(101), 1u);
  EXPECT_EQ(p.key(849), 749u);
  EXPECT_TRUE(p.wrapped());
  const Partition q = s.read_partition(500001, 850);
  EXPECT_EQ(q.key(0), 1u);
}

TEST_F(MasterFile, ContainsKey) {
  const MasterStore s = MasterStore::open(path_);
  EXPECT_TRUE(s.contains_key(1));
  EXPECT_TRUE(s.contains_key(500000));
  EXPECT_FALSE(s.contains_key(0));
  EXPECT_FALSE(s.contains_key(500001));
}

TEST(MasterStore, EmptyFileIsValid) {
  TempDir dir;
  const auto summary = generate_master(dir / "empty.bin", 0, 1);
  EXPECT_EQ(summary.record_count, 0u);
  const MasterStore s = MasterStore::open(dir / "empty.bin");
  EXPECT_EQ(s.record_count(), 0u);
  EXPECT_FALSE(s.contains_key(1));
  try {
    s.read_partition(1, 850);
    FAIL() << "an empty relation has no partitions";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyRelation);
  }
}

TEST(MasterStore, SameSeedGivesIdenticalBytes) {
  TempDir dir;
  generate_master(dir / "a.bin", 2000000, 7);
  const std::uint64_t a = fnv1a(testing::read_bytes(dir / "a.bin"));
  std::filesystem::remove(dir / "a.bin");
  const auto summary = generate_master(dir / "b.bin", 2000000, 7);
  const std::uint64_t b = fnv1a(testing::read_bytes(dir / "b.bin"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(summary.checksum, b);
  generate_master(dir / "c.bin", 1000, 8);
  generate_master(dir / "d.bin", 1000, 7);
  EXPECT_NE(fnv1a(testing::read_bytes(dir / "c.bin")), fnv1a(testing::read_bytes(dir / "d.bin")));
}

TEST(MasterStore, FlippedMagicIsFormatError) {
  TempDir dir;
  generate_master(dir / "m.bin", 100, 1);
  auto bytes = testing::read_bytes(dir / "m.bin");
  bytes[0] ^= 0xff;
  testing::write_bytes(dir / "m.bin", bytes);
  try {
    MasterStore::open(dir / "m.bin");
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(MasterStore, TruncatedFileIsCorruption) {
  TempDir dir;
  generate_master(dir / "m.bin", 100, 1);
  auto bytes = testing::read_bytes(dir / "m.bin");
  bytes.pop_back();
  testing::write_bytes(dir / "m.bin", bytes);
  try {
    MasterStore::open(dir / "m.bin");
    FAIL() << "expected a corruption error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruption);
  }
}

TEST(MasterStore, MissingFileIsStorageError) {
  TempDir dir;
  try {
    MasterStore::open(dir / "absent.bin");
    FAIL() << "expected a storage error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStorage);
  }
}

TEST(MasterStore, SparseKeysMatchLinearScan) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::vector<MasterRecord> recs;
  JoinKey k = 0;
  for (int i = 0; i < 3001; ++i) {
    k += 1 + static_cast<JoinKey>(rng() % 9);
    recs.push_back(testing::master_record(k, static_cast<std::uint8_t>(i)));
  }
  write_master(dir / "sparse.bin", recs);
  const RawMaster raw(dir / "sparse.bin");
  for (ReadMode mode : {ReadMode::kBuffered, ReadMode::kDirect}) {
    const MasterStore s = MasterStore::open(dir / "sparse.bin", mode);
    EXPECT_FALSE(s.dense_keys());
    for (int t = 0; t < 300; ++t) {
      const JoinKey start = static_cast<JoinKey>(rng() % (k + 20));
      const std::size_t d_b = 1 + rng() % 900;
      expect_window(s, raw, start, d_b);
    }
    std::vector<bool> present(k + 2, false);
    for (const auto& r : recs) present[r.key] = true;
    for (JoinKey q = 0; q <= k + 1; ++q) ASSERT_EQ(s.contains_key(q), present[q]) << q;
    EXPECT_EQ(s.find(recs[10].key)->payload, recs[10].payload);
  }
}

TEST(MasterStore, NonIncreasingKeysRejected) {
  TempDir dir;
  std::vector<MasterRecord> recs = {testing::master_record(5, 0), testing::master_record(5, 1)};
  EXPECT_THROW(write_master(dir / "bad.bin", recs), Error);
}

TEST(MasterStore, WindowLargerThanRelationReturnsEveryRecordOnce) {
  TempDir dir;
  generate_master(dir / "m.bin", 100, 1);
  const MasterStore s = MasterStore::open(dir / "m.bin", ReadMode::kDirect);
  const Partition p = s.read_partition(40, 850);
  ASSERT_EQ(p.size(), 100u);
  EXPECT_EQ(p.key(0), 40u);
  EXPECT_EQ(p.key(60), 100u);
  EXPECT_EQ(p.key(61), 1u);
  EXPECT_EQ(p.key(99), 39u);
}

}  // namespace
}  // namespace cachejoin
