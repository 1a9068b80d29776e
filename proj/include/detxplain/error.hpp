/*
 * Copyright 2026 The detxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DETXPLAIN_ERROR_HPP_
#define DETXPLAIN_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace detxplain {

// Failure categories. The numeric values of kConfig, kData and kNumeric are
// the CLI exit codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
  kDegenerateInput = 5,
  kIo = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace detxplain

#endif  // DETXPLAIN_ERROR_HPP_
