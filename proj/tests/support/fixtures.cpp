// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "perfwatch/report.hpp"

namespace perfwatch::testing {

namespace fs = std::filesystem;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

MeasureTree gpfs_tree(int run) {
  double io = run == kGpfsSpikeRun ? 50.0 : 5.0;
  MeasureNode root = MeasureNode::leaf("execution", 60.0 + 10.0 + io + 5.0, "s");
  root.add(MeasureNode::leaf("assembly", 60.0, "s", {"computation"}));
  root.add(MeasureNode::leaf("exchange", 10.0, "s", {"communication"}));
  root.add(MeasureNode::leaf("io", io, "s", {"io"}));
  return MeasureTree{std::move(root)};
}

std::vector<double> romio_values(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> values;
  for (int run = 1; run <= kRomioRuns; ++run) {
    double level = run < kRomioFirstFixedRun ? 100.0 : 70.0;
    values.push_back(level + uniform(rng, -2.0, 2.0));
  }
  return values;
}

MeasureTree romio_tree(double root_value) {
  MeasureNode root = MeasureNode::leaf("execution", root_value, "s");
  root.add(MeasureNode::leaf("solver", 55.0, "s", {"computation"}));
  root.add(MeasureNode::leaf("mpiio", root_value - 60.0, "s", {"io"}));
  return MeasureTree{std::move(root)};
}

MeasureTree cough_tree(bool vectorized) {
  double velocity = vectorized ? 10.0 : 40.0;
  MeasureNode nastin = MeasureNode::leaf("nastin", 80.0 + velocity, "s");
  nastin.add(MeasureNode::leaf("assembly", 50.0, "s", {"computation"}));
  nastin.add(MeasureNode::leaf("velocity_correction", velocity, "s", {"computation"}));
  nastin.add(MeasureNode::leaf("solver", 25.0, "s", {"computation", "communication"}));

  MeasureNode root = MeasureNode::leaf("cough", nastin.value + 20.0 + 30.0 + 10.0, "s");
  root.add(std::move(nastin));
  root.add(MeasureNode::leaf("io", 20.0, "s", {"io"}));
  root.add(MeasureNode::leaf("halo_exchange", 30.0, "s", {"communication"}));
  root.add(MeasureNode::leaf("memory", 2048.0, "MiB"));
  return MeasureTree{std::move(root)};
}

Timestamp fixture_time(int index) {
  // 2021-06-01T00:00:00Z plus one day per index.
  return Timestamp::from_seconds(1622505600 + static_cast<std::int64_t>(index) * 86400);
}

RunRecord make_record(const MeasureTree& tree, const std::string& case_name, int index, const std::string& branch,
                      const std::string& commit) {
  RunContext ctx;
  ctx.commit = commit.empty() ? "c" + std::to_string(index) : commit;
  ctx.branch = branch;
  ctx.pipeline_id = "p" + std::to_string(index);
  ctx.job_id = "j" + std::to_string(index);
  ctx.node_count = 2;
  ctx.task_count = 96;
  ctx.build = {{"compiler", "gcc"}, {"flavor", "release"}};
  ctx.platform = "desk";
  ctx.started_at = fixture_time(index);
  ctx.finished_at = Timestamp(ctx.started_at.micros() + 3'600'000'000LL);
  Timestamp ingested(ctx.finished_at.micros() + 1'000'000);
  return enrich(tree, case_name, index, {{"OMP_NUM_THREADS", "4"}, {"HOME", "/root"}}, ctx, {},
                [ingested] { return ingested; });
}

std::string report_text(const MeasureTree& tree, const std::string& case_name, std::int64_t iteration) {
  Report r;
  r.case_name = case_name;
  r.iteration = iteration;
  r.tree = tree;
  return serialize_report(r);
}

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "perfwatch-test-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace perfwatch::testing
