// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "perfwatch/measure.hpp"
#include "perfwatch/timestamp.hpp"

namespace perfwatch {

using StringMap = std::map<std::string, std::string>;

/// Execution context of one run.
struct RunMeta {
  std::string commit;
  std::string branch;
  std::string pipeline_id;
  std::string job_id;
  std::int64_t node_count = 1;
  std::int64_t task_count = 1;
  StringMap env;
  StringMap build;
  std::string platform;
  Timestamp started_at;
  Timestamp finished_at;

  bool operator==(const RunMeta&) const = default;
};

struct RunRecord {
  std::string run_id;
  std::string case_name;
  std::int64_t iteration = 0;
  MeasureTree tree;
  RunMeta meta;
  Timestamp ingested_at;

  bool operator==(const RunRecord&) const = default;
};

/// Environment variables worth keeping with a run. Everything else is
/// dropped so that credentials never reach the store.
struct EnvAllowlist {
  std::vector<std::string> prefixes{"OMP_", "MPI_", "SLURM_"};
  std::vector<std::string> names;

  bool allows(std::string_view variable) const;
  StringMap filter(const StringMap& env) const;
};

/// What the CI system and the scheduler tell us about a run.
struct RunContext {
  std::string commit;
  std::string branch;
  std::string pipeline_id;
  std::string job_id;
  std::int64_t node_count = 1;
  std::int64_t task_count = 1;
  StringMap build;
  std::string platform;
  Timestamp started_at;
  Timestamp finished_at;
};

using Clock = std::function<Timestamp()>;

/// Lowercase hex SHA-256 over (case, commit, started_at, job_id).
std::string compute_run_id(std::string_view case_name, std::string_view commit,
                           Timestamp started_at, std::string_view job_id);

RunRecord enrich(MeasureTree tree, std::string case_name, std::int64_t iteration,
                 const StringMap& environment, const RunContext& context,
                 const EnvAllowlist& allowlist = {}, const Clock& clock = Timestamp::now);

/// Snapshot of the current process environment.
StringMap capture_environment();

/// Fills commit/branch/pipeline/job and node/task counts from well-known
/// GitLab CI and Slurm variables when present.
RunContext context_from_environment(const StringMap& environment);

nlohmann::json to_json(const RunMeta& meta);
RunMeta meta_from_json(const nlohmann::json& j);

/// Canonical record text: the report format extended with "run_id",
/// "ingested_at" and a "meta" object.
std::string serialize_record(const RunRecord& record);
RunRecord parse_record(std::string_view bytes);

/// Throws Error(kBadRequest) or ValidationError when a record breaks its
/// invariants.
void check_record(const RunRecord& record);

}  // namespace perfwatch
