// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace perfwatch {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Expands {name} placeholders, then splits on whitespace without a shell.
/// Single- and double-quoted segments stay one token; inside double quotes a
/// backslash escapes the next character. Throws Error(kUnknownPlaceholder)
/// and Error(kEmptyCommand).
std::vector<std::string> render_command(std::string_view tmpl, const Bindings& bindings);

/// Substitution only, for path templates.
std::string expand_placeholders(std::string_view tmpl, const Bindings& bindings);

struct ProcessOptions {
  std::filesystem::path workdir;
  std::chrono::milliseconds timeout{0};  // 0: no limit
  std::size_t max_output = 64 * 1024;   // tail kept
};

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // interleaved stdout and stderr
  std::chrono::milliseconds elapsed{0};

  bool ok() const { return !timed_out && exit_code == 0; }
};

/// Runs argv in its own process group and kills the whole group on timeout.
/// A program that cannot be started reports exit code 127.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

}  // namespace perfwatch
