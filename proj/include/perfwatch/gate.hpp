// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "perfwatch/analysis.hpp"
#include "perfwatch/store.hpp"

namespace perfwatch {

/// CI gate outcome; the numeric value is the process exit code.
enum class Verdict { kPass = 0, kWarn = 10, kFail = 20 };

inline constexpr int kInfrastructureExitCode = 1;

std::string_view to_string(Verdict v);
inline int exit_code(Verdict v) { return static_cast<int>(v); }

struct GateParams {
  ClassifyParams classify;
  double fail_ratio = 0.10;
  /// Empty: the root plus every depth-1 child of the gated run.
  std::vector<std::string> watch_paths;
  /// Paths where a larger value is an improvement (throughput-like units).
  std::set<std::string, std::less<>> higher_is_better;
};

struct GateReason {
  std::string path;
  std::string unit;
  PointClass cls;
  Verdict severity = Verdict::kPass;
  bool regression = false;
  /// (new - baseline) / baseline; for shifts, after_median against
  /// before_median.
  double relative_change = 0.0;
  std::string note;
  std::optional<Attribution> attribution;
};

struct GateVerdict {
  Verdict kind = Verdict::kPass;
  std::string run_id;
  /// Every non-normal path, including improvements noted under a Pass.
  std::vector<GateReason> reasons;
};

/// Judges a stored run against the history of its case preceding it. Pure
/// in (store contents, run_id, params). Throws Error(kNotFound).
GateVerdict gate(const Store& store, std::string_view run_id, const GateParams& params = {});

nlohmann::json to_json(const GateParams& p);
nlohmann::json to_json(const GateVerdict& v);

}  // namespace perfwatch
