// SPDX-License-Identifier: Apache-2.0
//
// Read-mostly HTTP API over a store, versioned under /api/v1:
//
//   GET  /api/v1/cases
//   GET  /api/v1/cases/{case}/runs?limit&branch
//   GET  /api/v1/runs/{id}
//   GET  /api/v1/runs/{id}/labels?unit&path
//   GET  /api/v1/runs/{id}/sunburst?unit&path
//   GET  /api/v1/series?case&path&unit&branch&limit
//   GET  /api/v1/compare?a&b
//   GET  /api/v1/diff?from&to
//   POST /api/v1/runs            report body, plus a "meta" object
//
// Errors are {"code", "message"} with 400 for malformed queries, 404 for
// unknown ids, 409 for ingest conflicts and 503 while another writer holds
// the store.
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "perfwatch/config.hpp"
#include "perfwatch/store.hpp"

namespace httplib {
class Server;
}

namespace perfwatch {

struct CompareRow {
  std::string path;
  std::string unit;
  std::optional<double> value_a;
  std::optional<double> value_b;
  std::optional<double> delta;
  /// delta / |value_a|; infinite when value_a is 0 and the value moved.
  std::optional<double> relative_delta;
  /// "present", "absent_in_a", "absent_in_b" or "unit_mismatch".
  std::string status;
};

struct CompareResponse {
  std::string run_a;
  std::string run_b;
  std::string commit_a;
  std::string commit_b;
  /// Present rows by |relative_delta| descending, then the rest by path.
  std::vector<CompareRow> rows;
};

CompareResponse compare_runs(const RunRecord& a, const RunRecord& b);

nlohmann::json to_json(const CompareResponse& c);

struct ApiConfig {
  std::filesystem::path store_dir;
  /// Template with {from} and {to}; empty disables /diff.
  std::string diff_command;
  std::chrono::seconds diff_timeout{30};
  AnalysisConfig analysis;
  EnvAllowlist env_allowlist;
  /// Served at "/" when set.
  std::filesystem::path static_dir;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

using QueryParams = std::multimap<std::string, std::string>;

class ApiService {
 public:
  /// Opens the store for reading; throws Error(kNotFound) if it is missing.
  explicit ApiService(ApiConfig config);

  ApiResponse cases();
  ApiResponse case_runs(const std::string& case_name, const QueryParams& query);
  ApiResponse run(const std::string& run_id);
  ApiResponse labels(const std::string& run_id, const QueryParams& query);
  ApiResponse sunburst(const std::string& run_id, const QueryParams& query);
  ApiResponse series(const QueryParams& query);
  ApiResponse compare(const QueryParams& query);
  ApiResponse diff(const QueryParams& query);
  ApiResponse ingest(const std::string& body);

  /// Registers every route on `server`.
  void mount(httplib::Server& server);

  const ApiConfig& config() const { return config_; }

 private:
  ApiConfig config_;
  Store store_;
  std::mutex ingest_mu_;
};

/// Blocks serving until the process is stopped. Throws Error(kIo) when the
/// address cannot be bound.
void serve(ApiConfig config, const std::string& host, int port);

}  // namespace perfwatch
