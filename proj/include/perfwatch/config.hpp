// SPDX-License-Identifier: Apache-2.0
//
// Configuration files are YAML. Analysis parameters use flat keys:
//
//   window: 20          # baseline window (points)
//   k: 4.0              # threshold in effective spreads
//   persistence: 3      # streak length that makes a shift persistent
//   rel_floor: 0.01     # minimum spread relative to |median|
//   fail_ratio: 0.10    # persistent regression that fails the gate
//   min_seg: 5          # change-point detection: minimum segment length
//   accept: 0.15        #   minimum relative cost reduction
//   max_depth: 4        #   recursion depth
//   watch_paths: [execution, execution/io]
//   higher_is_better: [execution/throughput]
//
// Campaign files add the runner layout on top; see campaign.hpp.
#pragma once

#include <filesystem>
#include <string>

#include "perfwatch/gate.hpp"

namespace YAML {
class Node;
}

namespace perfwatch {

struct AnalysisConfig {
  GateParams gate;
  ShiftParams shifts;
};

/// Applies the analysis keys present in `node` on top of `config`.
/// Unknown keys are rejected with Error(kConfig).
void apply_analysis_keys(const YAML::Node& node, AnalysisConfig& config);

AnalysisConfig parse_analysis_config(const std::string& yaml_text);
AnalysisConfig load_analysis_config(const std::filesystem::path& path);

nlohmann::json to_json(const AnalysisConfig& config);

}  // namespace perfwatch
