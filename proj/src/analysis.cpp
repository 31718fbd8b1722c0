// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace perfwatch {

namespace {

using json = nlohmann::json;

// Deltas below this fraction of the largest aggregate entry are rounding noise.
constexpr double kNegligibleRelative = 1e-9;

std::vector<double> gather(std::span<const double> values, std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(values[i]);
  return out;
}

struct Streak {
  Direction direction;
  std::vector<std::size_t> indices;
};

void segment(std::span<const double> values, std::size_t lo, std::size_t hi, std::size_t depth,
             const ShiftParams& params, std::vector<ChangePoint>& out) {
  if (depth > params.max_depth) return;
  auto seg = values.subspan(lo, hi - lo);
  auto split = best_split(seg, params.min_seg);
  if (!split || split->unsplit_cost <= 0.0) return;
  double score = (split->unsplit_cost - split->cost) / split->unsplit_cost;
  if (score < params.accept) return;

  std::size_t at = lo + split->index;
  out.push_back({at, median(seg.first(split->index)), median(seg.subspan(split->index)), score});
  segment(values, lo, at, depth + 1, params, out);
  segment(values, at, hi, depth + 1, params, out);
}

}  // namespace

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "median of an empty range");
  std::vector<double> v(values.begin(), values.end());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double upper = *mid;
  if (v.size() % 2 == 1) return upper;
  double lower = *std::max_element(v.begin(), mid);
  return lower + (upper - lower) / 2.0;
}

BaselineStats baseline(std::span<const double> values, std::size_t window, double rel_floor) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "baseline needs at least one value");
  if (window == 0) window = 1;
  auto tail = values.last(std::min(window, values.size()));

  BaselineStats stats;
  stats.window = tail.size();
  stats.median = median(tail);
  std::vector<double> deviations;
  deviations.reserve(tail.size());
  for (double v : tail) deviations.push_back(std::abs(v - stats.median));
  stats.spread = kMadScale * median(deviations);
  stats.floor = rel_floor * std::abs(stats.median);
  return stats;
}

ClassKind kind_of(const PointClass& c) {
  switch (c.index()) {
    case 1: return ClassKind::kTransientAnomaly;
    case 2: return ClassKind::kPersistentShift;
    default: return ClassKind::kNormal;
  }
}

std::string_view to_string(ClassKind kind) {
  switch (kind) {
    case ClassKind::kNormal: return "normal";
    case ClassKind::kTransientAnomaly: return "transient_anomaly";
    case ClassKind::kPersistentShift: return "persistent_shift";
  }
  return "normal";
}

std::string_view to_string(Direction direction) { return direction == Direction::kUp ? "up" : "down"; }

std::vector<PointAssessment> assess_series(std::span<const double> values, const ClassifyParams& params) {
  std::vector<PointAssessment> out;
  out.reserve(values.size());
  std::vector<std::size_t> clean;
  std::optional<Streak> streak;
  const std::size_t persistence = std::max<std::size_t>(1, params.persistence);

  for (std::size_t i = 0; i < values.size(); ++i) {
    if (clean.empty()) {
      out.push_back({Normal{true}, {}, {}});
      clean.push_back(i);
      continue;
    }

    std::size_t take = std::min(std::max<std::size_t>(1, params.window), clean.size());
    std::vector<std::size_t> used(clean.end() - static_cast<std::ptrdiff_t>(take), clean.end());
    auto window_values = gather(values, used);
    BaselineStats stats = baseline(window_values, take, params.rel_floor);

    double deviation = values[i] - stats.median;
    double eff = stats.effective_spread();
    bool anomalous = eff > 0.0 ? std::abs(deviation) > params.k * eff : deviation != 0.0;

    if (!anomalous) {
      out.push_back({Normal{}, stats, std::move(used)});
      clean.push_back(i);
      streak.reset();
      continue;
    }

    Direction dir = deviation > 0.0 ? Direction::kUp : Direction::kDown;
    double magnitude = eff > 0.0 ? std::abs(deviation) / eff : std::numeric_limits<double>::infinity();
    if (streak && streak->direction == dir) {
      streak->indices.push_back(i);
    } else {
      streak = Streak{dir, {i}};
    }

    if (streak->indices.size() >= persistence) {
      double after = median(gather(values, streak->indices));
      out.push_back({PersistentShift{streak->indices.front(), stats.median, after, dir, magnitude}, stats,
                     std::move(used)});
      // The streak is the new regime.
      clean = std::move(streak->indices);
      streak.reset();
    } else {
      out.push_back({TransientAnomaly{dir, magnitude}, stats, std::move(used)});
    }
  }
  return out;
}

PointClass classify_latest(std::span<const double> values, const ClassifyParams& params) {
  if (values.size() < 2) return Normal{true};
  return assess_series(values, params).back().cls;
}

double l1_cost(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double m = median(values);
  double cost = 0.0;
  for (double v : values) cost += std::abs(v - m);
  return cost;
}

std::optional<Split> best_split(std::span<const double> segment, std::size_t min_seg) {
  min_seg = std::max<std::size_t>(1, min_seg);
  if (segment.size() < 2 * min_seg) return std::nullopt;
  Split best;
  best.unsplit_cost = l1_cost(segment);
  best.cost = std::numeric_limits<double>::infinity();
  for (std::size_t t = min_seg; t + min_seg <= segment.size(); ++t) {
    double cost = l1_cost(segment.first(t)) + l1_cost(segment.subspan(t));
    if (cost < best.cost) {
      best.cost = cost;
      best.index = t;
    }
  }
  return best;
}

std::vector<ChangePoint> detect_shifts(std::span<const double> values, const ShiftParams& params) {
  std::vector<ChangePoint> out;
  if (values.size() < 2 * std::max<std::size_t>(1, params.min_seg)) return out;
  segment(values, 0, values.size(), 1, params, out);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

Attribution attribute_labels(const LabelAggregate& current, std::span<const LabelAggregate> baseline_runs) {
  if (baseline_runs.empty()) throw Error(ErrorCode::kEmptyInput, "attribution needs at least one baseline run");
  for (const auto& b : baseline_runs) {
    if (b.unit != current.unit) {
      throw Error(ErrorCode::kUnitMismatch,
                  "baseline unit '" + b.unit + "' differs from current unit '" + current.unit + "'");
    }
  }

  std::map<std::string, double, std::less<>> labels(current.entries.begin(), current.entries.end());
  for (const auto& b : baseline_runs) {
    for (const auto& [label, _] : b.entries) labels.try_emplace(label, 0.0);
  }

  double magnitude = 0.0;
  for (const auto& [_, v] : current.entries) magnitude = std::max(magnitude, std::abs(v));
  for (const auto& b : baseline_runs) {
    for (const auto& [_, v] : b.entries) magnitude = std::max(magnitude, std::abs(v));
  }
  const double negligible = kNegligibleRelative * magnitude;

  Attribution out;
  out.unit = current.unit;
  for (const auto& [label, _] : labels) {
    std::vector<double> history;
    history.reserve(baseline_runs.size());
    for (const auto& b : baseline_runs) {
      auto it = b.entries.find(label);
      history.push_back(it == b.entries.end() ? 0.0 : it->second);
    }
    auto cur = current.entries.find(label);
    double delta = (cur == current.entries.end() ? 0.0 : cur->second) - median(history);
    if (std::abs(delta) <= negligible) continue;
    out.entries.push_back({label, delta, 0.0});
    out.delta_total += delta;
  }

  if (std::abs(out.delta_total) <= negligible) {
    out.entries.clear();
    out.delta_total = 0.0;
    out.no_net_change = true;
    return out;
  }
  for (auto& e : out.entries) e.share = e.delta / out.delta_total;
  std::stable_sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) {
    return std::abs(a.delta) > std::abs(b.delta);
  });
  return out;
}

json to_json(const BaselineStats& b) {
  return json{{"median", b.median}, {"spread", b.spread}, {"window", b.window}, {"floor", b.floor}};
}

json to_json(const PointClass& c) {
  json j{{"kind", to_string(kind_of(c))}};
  if (const auto* n = std::get_if<Normal>(&c)) {
    if (n->insufficient_history) j["insufficient_history"] = true;
  } else if (const auto* t = std::get_if<TransientAnomaly>(&c)) {
    j["direction"] = to_string(t->direction);
    j["magnitude"] = t->magnitude;
  } else if (const auto* p = std::get_if<PersistentShift>(&c)) {
    j["direction"] = to_string(p->direction);
    j["magnitude"] = p->magnitude;
    j["change_index"] = p->change_index;
    j["before_median"] = p->before_median;
    j["after_median"] = p->after_median;
  }
  return j;
}

json to_json(const ChangePoint& cp) {
  return json{{"index", cp.index},
              {"before_median", cp.before_median},
              {"after_median", cp.after_median},
              {"score", cp.score}};
}

json to_json(const Attribution& a) {
  json entries = json::array();
  for (const auto& e : a.entries) entries.push_back({{"label", e.label}, {"delta", e.delta}, {"share", e.share}});
  return json{{"unit", a.unit},
              {"delta_total", a.delta_total},
              {"no_net_change", a.no_net_change},
              {"entries", std::move(entries)}};
}

json to_json(const ClassifyParams& p) {
  return json{{"window", p.window}, {"k", p.k}, {"persistence", p.persistence}, {"rel_floor", p.rel_floor}};
}

json to_json(const ShiftParams& p) {
  return json{{"min_seg", p.min_seg}, {"accept", p.accept}, {"max_depth", p.max_depth}};
}

}  // namespace perfwatch
