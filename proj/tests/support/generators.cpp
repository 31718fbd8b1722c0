// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"

#include <map>
#include <string>

#include "fixtures.hpp"

namespace perfwatch::testing {

namespace {

const std::vector<std::string> kLabels{"computation", "communication", "io", "sync"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

LabelSet random_labels(std::mt19937_64& rng) {
  LabelSet out;
  std::size_t count = pick(rng, 4);  // 0..3, a third of the time 0
  if (count == 3) count = 0;
  while (out.size() < count) out.insert(kLabels[pick(rng, kLabels.size())]);
  return out;
}

// `budgets` maps a unit to the unspent value of the nearest ancestor of that
// unit.
void grow(std::mt19937_64& rng, MeasureNode& node, int depth, int max_depth, std::map<std::string, double*> budgets) {
  if (depth >= max_depth) return;
  double own = node.value;
  budgets[node.unit] = &own;
  std::size_t count = pick(rng, 5);
  for (std::size_t i = 0; i < count; ++i) {
    std::string unit = uniform(rng, 0.0, 1.0) < 0.2 ? "MiB" : "s";
    double value = 0.0;
    auto it = budgets.find(unit);
    if (it != budgets.end()) {
      double* left = it->second;
      // Now and then hand out the whole remainder so sums land on the parent.
      value = uniform(rng, 0.0, 1.0) < 0.15 ? *left : *left * uniform(rng, 0.0, 0.7);
      *left -= value;
      if (*left < 0.0) *left = 0.0;
    } else {
      value = uniform(rng, 1.0, 4096.0);
    }
    MeasureNode child = MeasureNode::leaf("n" + std::to_string(i), value, unit, random_labels(rng));
    grow(rng, child, depth + 1, max_depth, budgets);
    node.add(std::move(child));
  }
}

}  // namespace

MeasureTree random_tree(std::mt19937_64& rng, int max_depth) {
  MeasureNode root = MeasureNode::leaf("root", uniform(rng, 1.0, 1000.0), "s", random_labels(rng));
  grow(rng, root, 0, max_depth, {});
  return MeasureTree{std::move(root)};
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  std::size_t n = min_len + pick(rng, max_len - min_len + 1);
  double level = uniform(rng, 10.0, 1000.0);
  double noise = level * uniform(rng, 0.001, 0.05);
  bool step = uniform(rng, 0.0, 1.0) < 0.6;
  std::size_t step_at = 1 + pick(rng, n - 1);
  double step_size = level * uniform(rng, -0.5, 0.5);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = level + uniform(rng, -noise, noise);
    if (step && i >= step_at) v += step_size;
    if (uniform(rng, 0.0, 1.0) < 0.05) v += level * uniform(rng, 0.2, 1.0);
    out.push_back(v);
  }
  return out;
}

RunRecord random_record(std::mt19937_64& rng, int index) {
  RunContext ctx;
  ctx.commit = std::to_string(rng());
  ctx.branch = pick(rng, 2) == 0 ? "main" : "feature/x";
  ctx.pipeline_id = std::to_string(pick(rng, 100000));
  ctx.job_id = std::to_string(index);
  ctx.node_count = 1 + static_cast<std::int64_t>(pick(rng, 16));
  ctx.task_count = ctx.node_count * 48;
  ctx.platform = "desk";
  ctx.build = {{"compiler", pick(rng, 2) == 0 ? "gcc" : "intel"}, {"flags", "-O3 \"quoted\"\n"}};
  ctx.started_at = Timestamp(fixture_time(0).micros() + static_cast<std::int64_t>(index) * 1'000'003);
  ctx.finished_at = Timestamp(ctx.started_at.micros() + static_cast<std::int64_t>(pick(rng, 1'000'000)));
  StringMap env{{"OMP_NUM_THREADS", std::to_string(1 + pick(rng, 8))}, {"SECRET", "x"}};
  Timestamp ingested(ctx.finished_at.micros() + 1);
  std::string case_name = "case" + std::to_string(pick(rng, 4));
  return enrich(random_tree(rng, 4), case_name, index, env, ctx, {}, [ingested] { return ingested; });
}

}  // namespace perfwatch::testing
