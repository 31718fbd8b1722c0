// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "perfwatch/gate.hpp"

using namespace perfwatch;
using namespace perfwatch::testing;

namespace {

MeasureTree root_only(double v, const std::string& unit = "s") {
  return MeasureTree{MeasureNode::leaf("root", v, unit)};
}

const GateReason* reason_for(const GateVerdict& v, const std::string& path) {
  for (const auto& r : v.reasons) {
    if (r.path == path) return &r;
  }
  return nullptr;
}

struct History {
  TempDir dir;
  Store store = Store::open(dir.path(), Store::Mode::kWrite);
  std::vector<std::string> ids;

  void add(const MeasureTree& tree, const std::string& case_name = "c") {
    ids.push_back(store.store_run(make_record(tree, case_name, static_cast<int>(ids.size()))));
  }
};

}  // namespace

TEST(Gate, ColdStartPasses) {
  History h;
  h.add(gpfs_tree(1));
  auto v = gate(h.store, h.ids[0]);
  EXPECT_EQ(v.kind, Verdict::kPass);
  EXPECT_TRUE(v.reasons.empty());
  EXPECT_EQ(exit_code(v.kind), 0);
}

TEST(Gate, TwelvePercentPersistentRegressionFails) {
  History h;
  for (int i = 0; i < 17; ++i) h.add(root_only(100));
  for (int i = 0; i < 3; ++i) h.add(root_only(112));
  auto v = gate(h.store, h.ids.back());
  EXPECT_EQ(v.kind, Verdict::kFail);
  EXPECT_EQ(exit_code(v.kind), 20);
  const auto* r = reason_for(v, "root");
  ASSERT_NE(r, nullptr);
  EXPECT_TRUE(r->regression);
  EXPECT_NEAR(r->relative_change, 0.12, 1e-12);
  EXPECT_EQ(kind_of(r->cls), ClassKind::kPersistentShift);

  // The first two points of the streak are still transient.
  EXPECT_EQ(gate(h.store, h.ids[17]).kind, Verdict::kWarn);
  EXPECT_EQ(gate(h.store, h.ids[18]).kind, Verdict::kWarn);
}

TEST(Gate, SmallPersistentRegressionWarns) {
  History h;
  for (int i = 0; i < 17; ++i) h.add(root_only(100));
  for (int i = 0; i < 3; ++i) h.add(root_only(106));
  auto v = gate(h.store, h.ids.back());
  EXPECT_EQ(v.kind, Verdict::kWarn);
  EXPECT_EQ(reason_for(v, "root")->note, "persistent regression below fail ratio");

  GateParams strict;
  strict.fail_ratio = 0.05;
  EXPECT_EQ(gate(h.store, h.ids.back(), strict).kind, Verdict::kFail);
}

TEST(Gate, GpfsSpikeWarnsWithIoAttribution) {
  History h;
  for (int run = 1; run <= kGpfsRuns; ++run) h.add(gpfs_tree(run), "gpfs");
  auto v = gate(h.store, h.ids[kGpfsSpikeRun - 1]);
  EXPECT_EQ(v.kind, Verdict::kWarn);
  const auto* root = reason_for(v, "execution");
  ASSERT_NE(root, nullptr);
  EXPECT_EQ(kind_of(root->cls), ClassKind::kTransientAnomaly);
  ASSERT_TRUE(root->attribution);
  ASSERT_FALSE(root->attribution->entries.empty());
  EXPECT_EQ(root->attribution->entries[0].label, "io");
  EXPECT_GE(root->attribution->entries[0].share, 0.9);
  EXPECT_DOUBLE_EQ(root->attribution->entries[0].delta, 45.0);
  ASSERT_NE(reason_for(v, "execution/io"), nullptr);
  EXPECT_EQ(reason_for(v, "execution/assembly"), nullptr);

  for (int run = kGpfsSpikeRun + 1; run <= kGpfsRuns; ++run) {
    EXPECT_EQ(gate(h.store, h.ids[static_cast<std::size_t>(run - 1)]).kind, Verdict::kPass) << run;
  }
}

TEST(Gate, PersistentImprovementPassesWithNote) {
  History h;
  for (int i = 0; i < 17; ++i) h.add(root_only(100));
  for (int i = 0; i < 3; ++i) h.add(root_only(70));
  auto v = gate(h.store, h.ids.back());
  EXPECT_EQ(v.kind, Verdict::kPass);
  ASSERT_EQ(v.reasons.size(), 1u);
  EXPECT_FALSE(v.reasons[0].regression);
  EXPECT_EQ(v.reasons[0].note, "persistent improvement");
}

TEST(Gate, HigherIsBetterInvertsDirection) {
  History h;
  for (int i = 0; i < 17; ++i) h.add(root_only(100, "GFlop/s"));
  for (int i = 0; i < 3; ++i) h.add(root_only(70, "GFlop/s"));
  GateParams params;
  params.higher_is_better = {"root"};
  auto v = gate(h.store, h.ids.back(), params);
  EXPECT_EQ(v.kind, Verdict::kFail);
  EXPECT_TRUE(v.reasons[0].regression);
  EXPECT_EQ(gate(h.store, h.ids.back()).kind, Verdict::kPass);
}

TEST(Gate, ExplicitWatchPathsAndMissingPaths) {
  History h;
  for (int run = 1; run <= kGpfsRuns; ++run) h.add(gpfs_tree(run), "gpfs");
  GateParams params;
  params.watch_paths = {"execution/assembly", "execution/not_there"};
  EXPECT_EQ(gate(h.store, h.ids[kGpfsSpikeRun - 1], params).kind, Verdict::kPass);
}

TEST(Gate, OnlyEarlierRunsCount) {
  History h;
  for (int i = 0; i < 10; ++i) h.add(root_only(100));
  h.add(root_only(300));
  for (int i = 0; i < 5; ++i) h.add(root_only(300));
  // Gating the first spike ignores the runs stored after it.
  EXPECT_EQ(gate(h.store, h.ids[10]).kind, Verdict::kWarn);
}

TEST(Gate, UnknownRun) {
  History h;
  try {
    gate(h.store, "ffff");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(Gate, DeterministicSerialization) {
  History h;
  for (int run = 1; run <= kGpfsRuns; ++run) h.add(gpfs_tree(run), "gpfs");
  std::string first = to_json(gate(h.store, h.ids[5])).dump();
  for (int i = 0; i < 5; ++i) EXPECT_EQ(to_json(gate(h.store, h.ids[5])).dump(), first);
  auto reopened = Store::open(h.dir.path(), Store::Mode::kRead);
  EXPECT_EQ(to_json(gate(reopened, h.ids[5])).dump(), first);
  auto j = to_json(gate(h.store, h.ids[5]));
  EXPECT_EQ(j.at("verdict"), "warn");
  EXPECT_EQ(j.at("exit_code"), 10);
}
