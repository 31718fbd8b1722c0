// SPDX-License-Identifier: Apache-2.0
//
// Append-only run history.
//
// Layout of a store directory:
//   runs.log  records, each an 8-byte little-endian length followed by the
//             canonical record text
//   runs.idx  one JSON line per record (id, case, branch, offsets); derivable
//             from runs.log and rebuilt whenever it disagrees with it
//   LOCK      held with flock() by the single writer
//
// Readers only ever see complete records, so a reader racing a writer
// observes a prefix of the log.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perfwatch/run_record.hpp"

namespace perfwatch {

struct RunSummary {
  std::string run_id;
  std::string case_name;
  std::int64_t iteration = 0;
  std::string commit;
  std::string branch;
  Timestamp started_at;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct SeriesPoint {
  std::string run_id;
  Timestamp started_at;
  double value = 0.0;

  bool operator==(const SeriesPoint&) const = default;
};

/// Per-path history, ordered by (started_at, run_id).
struct Series {
  std::string case_name;
  std::string path;
  std::string unit;
  std::vector<SeriesPoint> points;

  std::vector<double> values() const;
};

struct SeriesFilter {
  std::optional<std::string> branch;
  std::optional<Timestamp> since;
  /// Keep only the most recent `limit` points.
  std::optional<std::size_t> limit;
};

class Store {
 public:
  enum class Mode { kRead, kWrite };

  /// kWrite creates the directory if needed and takes the writer lock
  /// (Error(kLocked) when another writer holds it). kRead requires an
  /// existing directory.
  static Store open(const std::filesystem::path& dir, Mode mode);

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  /// Durable append. Storing a record whose run_id is already present is a
  /// no-op when the content matches (ingestion time aside) and
  /// Error(kConflict) otherwise.
  std::string store_run(const RunRecord& record);

  /// Picks up records appended by another process since the last look.
  void refresh();

  std::size_t size() const;
  bool contains(std::string_view run_id) const;

  /// Throws Error(kNotFound).
  RunRecord get_run(std::string_view run_id) const;

  /// The stored text of a record, exactly as written.
  std::string raw_record(std::string_view run_id) const;

  std::vector<std::string> cases() const;

  /// Runs of a case ordered by (started_at, run_id).
  std::vector<RunSummary> runs(std::string_view case_name, const SeriesFilter& filter = {}) const;

  /// Runs lacking the path are skipped. When `unit` is empty the unit of the
  /// earliest run carrying the path is used. An unknown case yields an empty
  /// series; a malformed path throws Error(kBadRequest).
  Series query_series(std::string_view case_name, std::string_view path, std::string_view unit = {},
                      const SeriesFilter& filter = {}) const;

  const std::filesystem::path& directory() const;
  bool writable() const;
  /// True when opening had to rebuild runs.idx from runs.log.
  bool index_rebuilt() const;

 private:
  struct Impl;
  explicit Store(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace perfwatch
