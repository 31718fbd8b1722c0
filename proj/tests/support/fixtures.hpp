// SPDX-License-Identifier: Apache-2.0
//
// Replay fixtures for the three production scenarios the suite is built
// around: a shared file-system collapse slowing a single run's IO, an MPI-IO
// configuration fix lowering the IO time for good, and a vectorized kernel
// shrinking one subtree.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "perfwatch/run_record.hpp"
#include "perfwatch/store.hpp"

namespace perfwatch::testing {

/// Deterministic uniform draw in [lo, hi] independent of the standard
/// library's distribution implementations.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// Run `run` (1-based) of the GPFS scenario: computation 60, communication 10,
/// io 5 (50 in run 6), self time 5 under "execution".
MeasureTree gpfs_tree(int run);
inline constexpr int kGpfsRuns = 10;
inline constexpr int kGpfsSpikeRun = 6;

/// Root values of the ROMIO scenario: 100 +- 2 for runs 1..17, 70 +- 2 after.
std::vector<double> romio_values(std::uint64_t seed = 20211130);
inline constexpr int kRomioRuns = 30;
inline constexpr int kRomioFirstFixedRun = 18;

/// "execution" = value with solver 55 (computation), mpiio value - 60 (io),
/// self time 5.
MeasureTree romio_tree(double root_value);

/// Cough simulation before (false) and after (true) vectorizing the velocity
/// correction loop: that subtree drops from 40 s to 10 s.
MeasureTree cough_tree(bool vectorized);
inline constexpr const char* kVelocityCorrectionPath = "cough/nastin/velocity_correction";

/// Record with a fixed, distinct start time per index.
RunRecord make_record(const MeasureTree& tree, const std::string& case_name, int index,
                      const std::string& branch = "main", const std::string& commit = {});

/// Report text as an instrumented application would write it.
std::string report_text(const MeasureTree& tree, const std::string& case_name, std::int64_t iteration = 0);

Timestamp fixture_time(int index);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace perfwatch::testing
