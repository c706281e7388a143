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

// Line-oriented key=value text: '#' starts a comment, blank lines are
// ignored, whitespace around keys and values is trimmed.

#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace cachejoin::detail {

struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Throws kParse naming the line for a non-blank line without '='.
std::vector<KvEntry> parse_kv(std::istream& in, std::string_view source);

// Strict numeric parses of a whole value; throw kParse naming `what`.
std::uint64_t parse_u64(std::string_view value, std::string_view what);
double parse_double(std::string_view value, std::string_view what);
bool parse_bool(std::string_view value, std::string_view what);

std::string_view trim(std::string_view s) noexcept;

}  // namespace cachejoin::detail
