// SPDX-License-Identifier: Apache-2.0
//
// Campaign runner: build, run every case, harvest its report, ingest, gate,
// notify. Driven by a YAML file:
//
//   store_dir: history              # relative paths are relative to this file
//   summary_file: campaign-summary.json
//   notify_command: "./notify.sh {summary}"
//   platform: cluster
//   build_info: {compiler: gcc-12, flavor: release}
//   env_allowlist: ["OMP_*", "MPI_*", "SLURM_*", "APP_OPTS"]
//   analysis: {k: 4.0, fail_ratio: 0.10}
//   build_steps:
//     - {name: compile, command: "make -j8", workdir: src, timeout: 1800}
//   cases:
//     - name: cough
//       run_command: "./submit_and_wait.sh {case} {report}"
//       workdir: cases/cough
//       report_path: "{workdir}/perf.json"
//       timeout: 3600
//       expected_iterations: 1
//       nodes: 2
//       tasks: 96
//       gate: {fail_ratio: 0.05}
//
// Placeholders: build steps {workdir}; cases {case} {workdir} {report}
// {iteration}; report_path {case} {workdir} {iteration}; notify {summary}.
#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perfwatch/config.hpp"
#include "perfwatch/gate.hpp"
#include "perfwatch/run_record.hpp"

namespace perfwatch {

struct BuildStep {
  std::string name;
  std::string command;
  std::filesystem::path workdir;
  std::chrono::seconds timeout{0};
};

struct CaseSpec {
  std::string name;
  std::string run_command;
  std::filesystem::path workdir;
  std::string report_path;
  std::chrono::seconds timeout{0};
  int expected_iterations = 1;
  std::int64_t nodes = 1;
  std::int64_t tasks = 1;
  GateParams gate;
};

struct CampaignConfig {
  std::filesystem::path store_dir;
  std::filesystem::path summary_file;
  std::vector<BuildStep> build_steps;
  std::vector<CaseSpec> cases;
  std::optional<std::string> notify_command;
  EnvAllowlist env_allowlist;
  StringMap build_info;
  std::string platform;
  AnalysisConfig analysis;
};

/// Relative paths resolve against `base_dir`. Throws Error(kConfig).
CampaignConfig parse_campaign_config(const std::string& yaml_text, const std::filesystem::path& base_dir);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

/// Resolved report location of a case for one iteration.
std::filesystem::path report_location(const CaseSpec& spec, int iteration);

struct CampaignContext {
  std::string commit;
  std::string branch;
  std::string pipeline_id;
  std::string job_id;
};

struct StepResult {
  std::string name;
  bool ok = false;
  int exit_code = -1;
  bool timed_out = false;
  std::string output_tail;
};

struct CaseResult {
  std::string name;
  bool run_ok = false;
  std::vector<std::string> run_ids;
  std::optional<GateVerdict> verdict;
  std::string error;
  int exit_code = 0;
};

struct CampaignResult {
  bool build_ok = true;
  std::vector<StepResult> builds;
  std::vector<CaseResult> cases;
  std::string error;
  int exit_code = 0;
  std::filesystem::path summary_file;
};

struct CampaignHooks {
  Clock clock = Timestamp::now;
  /// Environment recorded with each run (before allowlist filtering).
  std::optional<StringMap> environment;
};

CampaignResult run_campaign(const CampaignConfig& config, const CampaignContext& context,
                            const CampaignHooks& hooks = {});

nlohmann::json to_json(const CampaignResult& result);

}  // namespace perfwatch
