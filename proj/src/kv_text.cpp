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

#include "kv_text.hpp"

#include <charconv>
#include <cmath>

#include "cachejoin/error.hpp"

namespace cachejoin::detail {

std::string_view trim(std::string_view s) noexcept {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<KvEntry> parse_kv(std::istream& in, std::string_view source) {
  std::vector<KvEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos || trim(v.substr(0, eq)).empty()) {
      fail(ErrorCode::kParse, std::string(source) + ":" + std::to_string(n) +
                                  ": expected key=value, got '" + std::string(v) + "'");
    }
    out.push_back({std::string(trim(v.substr(0, eq))), std::string(trim(v.substr(eq + 1))), n});
  }
  return out;
}

std::uint64_t parse_u64(std::string_view value, std::string_view what) {
  value = trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    fail(ErrorCode::kParse, std::string(what) + ": '" + std::string(value) +
                                "' is not a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view value, std::string_view what) {
  value = trim(value);
  double out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size() ||
      !std::isfinite(out)) {
    fail(ErrorCode::kParse,
         std::string(what) + ": '" + std::string(value) + "' is not a finite number");
  }
  return out;
}

bool parse_bool(std::string_view value, std::string_view what) {
  value = trim(value);
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  fail(ErrorCode::kParse, std::string(what) + ": '" + std::string(value) + "' is not a boolean");
}

}  // namespace cachejoin::detail
