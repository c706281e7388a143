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

// Record layouts shared by the master store, the stream side and the join
// output. All multi-byte integers on disk are big-endian.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace cachejoin {

using JoinKey = std::uint32_t;

inline constexpr std::size_t kKeyWidth = 4;
inline constexpr std::size_t kMasterRecordSize = 120;  // v_R
inline constexpr std::size_t kMasterPayloadSize = kMasterRecordSize - kKeyWidth;
inline constexpr std::size_t kStreamRecordSize = 20;  // v_S
inline constexpr std::size_t kStreamPayloadSize = kStreamRecordSize - kKeyWidth;
inline constexpr std::size_t kJoinedRecordSize =
    kKeyWidth + kStreamPayloadSize + kMasterPayloadSize;
// Bytes charged per queue entry.
inline constexpr std::size_t kQueueEntrySize = 4;

inline void store_be32(std::uint8_t* out, std::uint32_t v) noexcept {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

inline std::uint32_t load_be32(const std::uint8_t* in) noexcept {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

inline void store_be64(std::uint8_t* out, std::uint64_t v) noexcept {
  store_be32(out, static_cast<std::uint32_t>(v >> 32));
  store_be32(out + 4, static_cast<std::uint32_t>(v));
}

inline std::uint64_t load_be64(const std::uint8_t* in) noexcept {
  return (std::uint64_t{load_be32(in)} << 32) | load_be32(in + 4);
}

struct MasterRecord {
  JoinKey key = 0;
  std::array<std::uint8_t, kMasterPayloadSize> payload{};

  void serialize(std::span<std::uint8_t, kMasterRecordSize> out) const noexcept {
    store_be32(out.data(), key);
    std::memcpy(out.data() + kKeyWidth, payload.data(), payload.size());
  }

  static MasterRecord deserialize(const std::uint8_t* in) noexcept {
    MasterRecord r;
    r.key = load_be32(in);
    std::memcpy(r.payload.data(), in + kKeyWidth, r.payload.size());
    return r;
  }

  friend bool operator==(const MasterRecord&, const MasterRecord&) = default;
};

struct StreamRecord {
  JoinKey fkey = 0;
  std::array<std::uint8_t, kStreamPayloadSize> payload{};

  void serialize(std::span<std::uint8_t, kStreamRecordSize> out) const noexcept {
    store_be32(out.data(), fkey);
    std::memcpy(out.data() + kKeyWidth, payload.data(), payload.size());
  }

  static StreamRecord deserialize(const std::uint8_t* in) noexcept {
    StreamRecord r;
    r.fkey = load_be32(in);
    std::memcpy(r.payload.data(), in + kKeyWidth, r.payload.size());
    return r;
  }

  friend bool operator==(const StreamRecord&, const StreamRecord&) = default;
  friend auto operator<=>(const StreamRecord&, const StreamRecord&) = default;
};

// One join result: fkey, stream payload, master payload. Serialized in that
// order, 136 bytes.
struct JoinedRecord {
  std::array<std::uint8_t, kJoinedRecordSize> bytes{};

  JoinedRecord() = default;
  JoinedRecord(const StreamRecord& s, const std::uint8_t* master_payload) noexcept {
    store_be32(bytes.data(), s.fkey);
    std::memcpy(bytes.data() + kKeyWidth, s.payload.data(), kStreamPayloadSize);
    std::memcpy(bytes.data() + kKeyWidth + kStreamPayloadSize, master_payload,
                kMasterPayloadSize);
  }

  JoinKey fkey() const noexcept { return load_be32(bytes.data()); }
  std::span<const std::uint8_t> stream_payload() const noexcept {
    return {bytes.data() + kKeyWidth, kStreamPayloadSize};
  }
  std::span<const std::uint8_t> master_payload() const noexcept {
    return {bytes.data() + kKeyWidth + kStreamPayloadSize, kMasterPayloadSize};
  }

  friend bool operator==(const JoinedRecord&, const JoinedRecord&) = default;
  friend auto operator<=>(const JoinedRecord&, const JoinedRecord&) = default;
};

}  // namespace cachejoin
