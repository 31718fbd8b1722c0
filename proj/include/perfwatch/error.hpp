// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perfwatch {

enum class ErrorCode {
  kSyntax,
  kUnsupportedSchema,
  kInvalidTree,
  kUnknownUnit,
  kUnitMismatch,
  kConflict,
  kIo,
  kLocked,
  kNotFound,
  kBadRequest,
  kUnknownPlaceholder,
  kEmptyCommand,
  kConfig,
  kEmptyInput,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the CLI and the HTTP layer can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace perfwatch
