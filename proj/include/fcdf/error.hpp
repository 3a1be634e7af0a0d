// Copyright 2026 The FCDF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FCDF_ERROR_HPP_
#define FCDF_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fcdf {

enum class ErrorKind {
  kValidation,  // bad user input or flags
  kParameter,   // no valid scheme/ring parameters
  kContract,    // API misuse: mismatched params, domains, lengths
  kEncoding,    // plaintext outside the encodable range
  kBudget,      // ciphertext sum would exceed plaintext or noise capacity
  kPolicy,      // incompatible domain summaries
  kPartition,   // a partition request cannot be satisfied
  kFraming,     // malformed wire frame
  kProtocol,    // peer misbehaviour or aborted session
  kIo,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kEncoding: return "encoding";
    case ErrorKind::kBudget: return "budget";
    case ErrorKind::kPolicy: return "policy";
    case ErrorKind::kPartition: return "partition";
    case ErrorKind::kFraming: return "framing";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// Process exit code for an error kind: 2 validation, 3 protocol/crypto, 4 I/O.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kParameter:
    case ErrorKind::kEncoding:
    case ErrorKind::kPolicy:
    case ErrorKind::kPartition:
      return 2;
    case ErrorKind::kContract:
    case ErrorKind::kBudget:
    case ErrorKind::kFraming:
    case ErrorKind::kProtocol:
      return 3;
    case ErrorKind::kIo:
      return 4;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind),
        message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The text without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

// Raised while decoding a wire frame; offset is the first offending byte.
class FramingError : public Error {
 public:
  FramingError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::kFraming,
              what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace fcdf

#endif  // FCDF_ERROR_HPP_
