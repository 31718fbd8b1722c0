// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "perfwatch/measure.hpp"

namespace perfwatch {

/// One report file as emitted by an instrumented application.
struct Report {
  std::string case_name;
  std::int64_t iteration = 0;
  MeasureTree tree;
  /// Keys this version does not understand, by node path ("" for the top
  /// level object). Kept for inspection, never written back.
  std::map<std::string, nlohmann::json> unknown_keys;
};

struct ReportOverrides {
  std::optional<std::string> case_name;
  std::optional<std::int64_t> iteration;
};

/// Parses and validates a report. Label sets come back deduplicated and
/// sorted. Throws Error(kSyntax) with the byte offset on malformed text,
/// Error(kUnsupportedSchema) and ValidationError.
Report parse_report(std::string_view bytes, const ReportOverrides& overrides = {});

/// Canonical text: compact, keys sorted, "labels" and "children" always
/// present, values written as floating point, unknown keys dropped.
std::string serialize_report(const Report& report);

nlohmann::json to_json(const MeasureNode& node);
MeasureNode node_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SunburstNode& node);
nlohmann::json to_json(const LabelAggregate& agg);
nlohmann::json to_json(const Violation& v);

}  // namespace perfwatch
