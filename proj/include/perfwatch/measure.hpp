// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical measure trees.
//
// A tree mirrors the phase stack of one execution. Every node carries a value,
// a unit and a set of free-form labels. Parent values are inclusive: the part
// of a parent not covered by its same-unit children is its self value. Nodes
// whose unit differs from their parent's are transparent to the parent's
// accounting: the parent's same-unit children are found by descending through
// them.
#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perfwatch/error.hpp"

namespace perfwatch {

inline constexpr int kSchemaVersion = 1;

/// Slack allowed when children sum up to their parent.
inline constexpr double kSumSlack = 1e-9;

/// Relative tolerance for conservation checks.
inline constexpr double kConservationTolerance = 1e-6;

inline constexpr std::string_view kUnlabeled = "unlabeled";

using LabelSet = std::set<std::string>;

struct MeasureNode {
  std::string name;
  double value = 0.0;
  std::string unit;
  LabelSet labels;
  std::vector<MeasureNode> children;

  static MeasureNode leaf(std::string name, double value, std::string unit, LabelSet labels = {});

  MeasureNode& add(MeasureNode child) {
    children.push_back(std::move(child));
    return *this;
  }

  MeasureNode with(MeasureNode child) && {
    children.push_back(std::move(child));
    return std::move(*this);
  }

  const MeasureNode* child(std::string_view child_name) const;

  bool operator==(const MeasureNode&) const = default;
};

struct MeasureTree {
  MeasureNode root;
  int schema_version = kSchemaVersion;

  bool operator==(const MeasureTree&) const = default;
};

enum class ViolationKind {
  kEmptyName,
  kSeparatorInName,
  kNonFinite,
  kNegativeDuration,
  kDuplicateSibling,
  kChildrenExceedParent,
  kSchemaVersion,
};

struct Violation {
  std::string path;
  ViolationKind kind;
  std::string message;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

/// Raised by operations that require a valid tree.
class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport violations);

  const ValidationReport& violations() const noexcept { return violations_; }

 private:
  ValidationReport violations_;
};

/// All violations, in pre-order. An empty report means the tree is valid.
ValidationReport validate_tree(const MeasureTree& tree);

/// Throws ValidationError when validate_tree reports anything.
void require_valid(const MeasureTree& tree);

struct PathValue {
  std::string path;
  double value = 0.0;
  std::string unit;
  LabelSet labels;
  double self_value = 0.0;

  bool operator==(const PathValue&) const = default;
};

/// True for "a", "a/b/c"; false for "", "/a", "a//b", "a/".
bool is_valid_path(std::string_view path);

std::string join_path(std::string_view parent, std::string_view name);

/// Number of segments minus one ("root" is depth 0).
std::size_t path_depth(std::string_view path);

/// Pre-order list of every node. Throws ValidationError on invalid trees.
std::vector<PathValue> flatten_paths(const MeasureTree& tree);

/// Inverse of flatten_paths. Entries must be in pre-order with each parent
/// preceding its children.
MeasureTree rebuild_tree(std::span<const PathValue> entries);

/// Node at `path` (full path including the root name), or nullptr.
const MeasureNode* find_node(const MeasureTree& tree, std::string_view path);

struct LabelAggregate {
  std::string unit;
  std::map<std::string, double, std::less<>> entries;

  double total() const;

  bool operator==(const LabelAggregate&) const = default;
};

/// Splits the self value of every node carrying `unit` across its labels.
/// `at_path` selects a subtree (default: the whole tree); the unit must be the
/// unit of that subtree's root.
LabelAggregate aggregate_by_label(const MeasureTree& tree, std::string_view unit,
                                  std::string_view at_path = {});

struct SunburstNode {
  std::string path;
  std::string name;
  double value = 0.0;
  /// value / parent value; 1 for the root of the sunburst.
  double fraction = 1.0;
  double self_value = 0.0;
  LabelSet labels;
  std::vector<SunburstNode> children;
};

SunburstNode sunburst(const MeasureTree& tree, std::string_view unit, std::string_view at_path = {});

}  // namespace perfwatch
