/*
 * Copyright 2026 The cset Authors.
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

#ifndef CSET_ERROR_H_
#define CSET_ERROR_H_

#include <stdexcept>
#include <string>

namespace cset {

// Broad failure category. The CLI maps each category to its own exit code.
enum class ErrorKind {
  kUsage,  // Invalid argument or option value.
  kIo,     // File missing, unreadable or unwritable.
  kData,   // Input content violates a format or domain invariant.
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error UsageError(const std::string& message) {
  return Error(ErrorKind::kUsage, message);
}
inline Error IoError(const std::string& message) {
  return Error(ErrorKind::kIo, message);
}
inline Error DataError(const std::string& message) {
  return Error(ErrorKind::kData, message);
}

}  // namespace cset

#endif  // CSET_ERROR_H_
