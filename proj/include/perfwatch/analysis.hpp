// SPDX-License-Identifier: Apache-2.0
//
// History-based noise filtering.
//
// A series point is judged against a robust baseline (median and scaled MAD)
// of the preceding points that were themselves judged normal. One-off
// excursions are transient anomalies and never enter later baselines; a
// streak of same-direction excursions is a persistent shift and becomes the
// new baseline. Offline, binary segmentation under an L1 cost locates regime
// boundaries over a whole series.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "perfwatch/measure.hpp"

namespace perfwatch {

inline constexpr double kMadScale = 1.4826;

/// Median of a non-empty range (mean of the two middle values for even sizes).
double median(std::span<const double> values);

struct BaselineStats {
  double median = 0.0;
  /// kMadScale * median absolute deviation.
  double spread = 0.0;
  std::size_t window = 0;
  /// rel_floor * |median|.
  double floor = 0.0;

  double effective_spread() const { return spread > floor ? spread : floor; }
};

/// Statistics over the trailing `window` values. Throws Error(kEmptyInput).
BaselineStats baseline(std::span<const double> values, std::size_t window = 20, double rel_floor = 0.01);

enum class Direction { kUp, kDown };

struct Normal {
  bool insufficient_history = false;
};

struct TransientAnomaly {
  Direction direction = Direction::kUp;
  double magnitude = 0.0;  // in effective spreads
};

struct PersistentShift {
  std::size_t change_index = 0;  // first point of the streak
  double before_median = 0.0;
  double after_median = 0.0;
  Direction direction = Direction::kUp;
  double magnitude = 0.0;  // of the latest point, in effective spreads
};

using PointClass = std::variant<Normal, TransientAnomaly, PersistentShift>;

enum class ClassKind { kNormal, kTransientAnomaly, kPersistentShift };

ClassKind kind_of(const PointClass& c);
std::string_view to_string(ClassKind kind);
std::string_view to_string(Direction direction);

struct ClassifyParams {
  std::size_t window = 20;
  double k = 4.0;
  std::size_t persistence = 3;
  double rel_floor = 0.01;
};

/// Classification of one point together with the baseline it was judged
/// against.
struct PointAssessment {
  PointClass cls;
  BaselineStats baseline;
  /// Indices of the points that formed the baseline.
  std::vector<std::size_t> baseline_indices;
};

/// Causal classification of every point, left to right. Element i depends
/// only on values[0..i].
std::vector<PointAssessment> assess_series(std::span<const double> values,
                                           const ClassifyParams& params = {});

/// Classification of the last value. Fewer than two values yield
/// Normal{insufficient_history = true}.
PointClass classify_latest(std::span<const double> values, const ClassifyParams& params = {});

struct ShiftParams {
  std::size_t min_seg = 5;
  double accept = 0.15;
  std::size_t max_depth = 4;
};

struct ChangePoint {
  std::size_t index = 0;  // first point of the new regime
  double before_median = 0.0;
  double after_median = 0.0;
  double score = 0.0;  // relative cost reduction

  bool operator==(const ChangePoint&) const = default;
};

/// Sum of absolute deviations from the median; 0 for an empty range.
double l1_cost(std::span<const double> values);

struct Split {
  std::size_t index = 0;  // relative to the segment
  double cost = 0.0;
  double unsplit_cost = 0.0;
};

/// Cheapest split leaving at least `min_seg` points on each side; ties go to
/// the smallest index. Empty when the segment is too short.
std::optional<Split> best_split(std::span<const double> segment, std::size_t min_seg);

/// Binary segmentation. Returns accepted change points sorted by index; an
/// empty list when the series is shorter than 2 * min_seg.
std::vector<ChangePoint> detect_shifts(std::span<const double> values, const ShiftParams& params = {});

struct AttributionEntry {
  std::string label;
  double delta = 0.0;
  double share = 0.0;
};

struct Attribution {
  std::string unit;
  double delta_total = 0.0;
  bool no_net_change = false;
  /// Ordered by |delta| descending.
  std::vector<AttributionEntry> entries;
};

/// Which operation types explain the difference between `current` and the
/// per-label medians of `baseline_runs`.
Attribution attribute_labels(const LabelAggregate& current, std::span<const LabelAggregate> baseline_runs);

nlohmann::json to_json(const BaselineStats& b);
nlohmann::json to_json(const PointClass& c);
nlohmann::json to_json(const ChangePoint& cp);
nlohmann::json to_json(const Attribution& a);
nlohmann::json to_json(const ClassifyParams& p);
nlohmann::json to_json(const ShiftParams& p);

}  // namespace perfwatch
