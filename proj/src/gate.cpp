// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace perfwatch {

namespace {

using json = nlohmann::json;

double relative(double now, double before) {
  if (before == 0.0) return now == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), now);
  return (now - before) / std::abs(before);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string> default_watch_paths(const MeasureTree& tree) {
  std::vector<std::string> paths{tree.root.name};
  for (const auto& c : tree.root.children) paths.push_back(join_path(tree.root.name, c.name));
  return paths;
}

std::optional<Attribution> attribute(const Store& store, const RunRecord& run, const std::string& path,
                                     const std::string& unit, const Series& series,
                                     const std::vector<std::size_t>& baseline_indices) {
  if (baseline_indices.empty()) return std::nullopt;
  try {
    LabelAggregate current = aggregate_by_label(run.tree, unit, path);
    std::vector<LabelAggregate> history;
    history.reserve(baseline_indices.size());
    for (auto i : baseline_indices) {
      RunRecord past = store.get_run(series.points[i].run_id);
      history.push_back(aggregate_by_label(past.tree, unit, path));
    }
    return attribute_labels(current, history);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kWarn: return "warn";
    case Verdict::kFail: return "fail";
  }
  return "pass";
}

GateVerdict gate(const Store& store, std::string_view run_id, const GateParams& params) {
  RunRecord run = store.get_run(run_id);
  GateVerdict verdict;
  verdict.run_id = run.run_id;

  auto paths = params.watch_paths.empty() ? default_watch_paths(run.tree) : params.watch_paths;
  for (const auto& path : paths) {
    const MeasureNode* node = find_node(run.tree, path);
    if (node == nullptr) continue;

    Series series = store.query_series(run.case_name, path, node->unit);
    auto self = std::find_if(series.points.begin(), series.points.end(),
                             [&](const SeriesPoint& p) { return p.run_id == run.run_id; });
    if (self == series.points.end()) continue;
    series.points.erase(std::next(self), series.points.end());

    auto values = series.values();
    auto assessments = assess_series(values, params.classify);
    const PointAssessment& latest = assessments.back();
    ClassKind kind = kind_of(latest.cls);
    if (kind == ClassKind::kNormal) continue;

    const bool larger_is_worse = !params.higher_is_better.contains(path);
    GateReason reason;
    reason.path = path;
    reason.unit = node->unit;
    reason.cls = latest.cls;

    if (const auto* t = std::get_if<TransientAnomaly>(&latest.cls)) {
      reason.relative_change = relative(values.back(), latest.baseline.median);
      reason.regression = (t->direction == Direction::kUp) == larger_is_worse;
      reason.severity = Verdict::kWarn;
      reason.note = reason.regression ? "transient slowdown" : "transient improvement";
    } else if (const auto* s = std::get_if<PersistentShift>(&latest.cls)) {
      reason.relative_change = relative(s->after_median, s->before_median);
      reason.regression = (s->direction == Direction::kUp) == larger_is_worse;
      double worsening = larger_is_worse ? reason.relative_change : -reason.relative_change;
      if (reason.regression && worsening >= params.fail_ratio) {
        reason.severity = Verdict::kFail;
        reason.note = "persistent regression";
      } else if (reason.regression) {
        reason.severity = Verdict::kWarn;
        reason.note = "persistent regression below fail ratio";
      } else {
        reason.severity = Verdict::kPass;
        reason.note = "persistent improvement";
      }
    }
    reason.attribution = attribute(store, run, path, node->unit, series, latest.baseline_indices);
    if (reason.severity > verdict.kind) verdict.kind = reason.severity;
    verdict.reasons.push_back(std::move(reason));
  }
  return verdict;
}

json to_json(const GateParams& p) {
  json j = to_json(p.classify);
  j["fail_ratio"] = p.fail_ratio;
  j["watch_paths"] = p.watch_paths;
  j["higher_is_better"] = p.higher_is_better;
  return j;
}

json to_json(const GateVerdict& v) {
  json reasons = json::array();
  for (const auto& r : v.reasons) {
    json jr{{"path", r.path},
            {"unit", r.unit},
            {"class", to_json(r.cls)},
            {"severity", to_string(r.severity)},
            {"regression", r.regression},
            {"relative_change", finite_or_null(r.relative_change)},
            {"note", r.note}};
    jr["attribution"] = r.attribution ? to_json(*r.attribution) : json(nullptr);
    reasons.push_back(std::move(jr));
  }
  return json{{"run_id", v.run_id},
              {"verdict", to_string(v.kind)},
              {"exit_code", exit_code(v.kind)},
              {"reasons", std::move(reasons)}};
}

}  // namespace perfwatch
