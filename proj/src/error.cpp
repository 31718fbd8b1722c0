// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/error.hpp"

namespace perfwatch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "syntax_error";
    case ErrorCode::kUnsupportedSchema: return "unsupported_schema";
    case ErrorCode::kInvalidTree: return "invalid_tree";
    case ErrorCode::kUnknownUnit: return "unknown_unit";
    case ErrorCode::kUnitMismatch: return "unit_mismatch";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kLocked: return "store_locked";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kBadRequest: return "bad_request";
    case ErrorCode::kUnknownPlaceholder: return "unknown_placeholder";
    case ErrorCode::kEmptyCommand: return "empty_command";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kEmptyInput: return "empty_input";
  }
  return "unknown";
}

}  // namespace perfwatch
