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

#pragma once

#include <stdexcept>
#include <string>

namespace cachejoin {

// Values mirror cj_status in cachejoin.h; keep the two in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kStorage = 2,
  kFormat = 3,
  kCorruption = 4,
  kCapacity = 5,
  kEmptyRelation = 6,
  kInsufficientMemory = 7,
  kDomain = 8,
  kParse = 9,
  kTimeout = 10,
  kContractViolation = 11,
  kInternal = 12,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace cachejoin
