// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/measure.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <numeric>
#include <unordered_set>

namespace perfwatch {

namespace {

struct Located {
  const MeasureNode* node;
  std::string path;
};

// Nearest descendants of `node` carrying `unit`, descending through nodes of
// other units.
void collect_same_unit(const MeasureNode& node, const std::string& path, std::string_view unit,
                       std::vector<Located>& out) {
  for (const auto& c : node.children) {
    std::string child_path = join_path(path, c.name);
    if (c.unit == unit) {
      out.push_back({&c, std::move(child_path)});
    } else {
      collect_same_unit(c, child_path, unit, out);
    }
  }
}

std::vector<Located> same_unit_children(const MeasureNode& node, const std::string& path) {
  std::vector<Located> out;
  collect_same_unit(node, path, node.unit, out);
  return out;
}

double children_sum(const std::vector<Located>& kids) {
  double sum = 0.0;
  for (const auto& k : kids) sum += k.node->value;
  return sum;
}

void validate_node(const MeasureNode& node, const std::string& path, ValidationReport& out) {
  if (node.name.empty()) {
    out.push_back({path, ViolationKind::kEmptyName, "empty name"});
  } else if (node.name.find('/') != std::string::npos) {
    out.push_back({path, ViolationKind::kSeparatorInName, "name contains '/'"});
  }
  if (!std::isfinite(node.value)) {
    out.push_back({path, ViolationKind::kNonFinite, "non-finite value"});
  } else if (node.unit == "s" && node.value < 0.0) {
    out.push_back({path, ViolationKind::kNegativeDuration, "negative duration"});
  }

  std::unordered_set<std::string_view> seen;
  for (const auto& c : node.children) {
    if (!seen.insert(c.name).second) {
      out.push_back({join_path(path, c.name), ViolationKind::kDuplicateSibling,
                     "duplicate sibling name"});
    }
  }

  auto inner = same_unit_children(node, path);
  if (std::isfinite(node.value) && !inner.empty()) {
    double sum = children_sum(inner);
    if (std::isfinite(sum) && sum > node.value + std::abs(node.value) * kSumSlack) {
      out.push_back({path, ViolationKind::kChildrenExceedParent, "children exceed parent"});
    }
  }

  for (const auto& c : node.children) validate_node(c, join_path(path, c.name), out);
}

double self_of(const MeasureNode& node, const std::string& path) {
  return node.value - children_sum(same_unit_children(node, path));
}

void flatten_into(const MeasureNode& node, const std::string& path, std::vector<PathValue>& out) {
  out.push_back({path, node.value, node.unit, node.labels, self_of(node, path)});
  for (const auto& c : node.children) flatten_into(c, join_path(path, c.name), out);
}

struct Subtree {
  const MeasureNode* node;
  std::string path;
};

Subtree resolve_subtree(const MeasureTree& tree, std::string_view at_path, std::string_view unit) {
  require_valid(tree);
  Subtree sub{&tree.root, tree.root.name};
  if (!at_path.empty()) {
    const MeasureNode* found = find_node(tree, at_path);
    if (found == nullptr) {
      throw Error(ErrorCode::kNotFound, "no node at path '" + std::string(at_path) + "'");
    }
    sub = {found, std::string(at_path)};
  }
  if (sub.node->unit != unit) {
    bool carried = false;
    std::vector<const MeasureNode*> stack{sub.node};
    while (!stack.empty() && !carried) {
      const MeasureNode* n = stack.back();
      stack.pop_back();
      carried = n->unit == unit;
      for (const auto& c : n->children) stack.push_back(&c);
    }
    if (!carried) {
      throw Error(ErrorCode::kUnknownUnit, "no node carries unit '" + std::string(unit) + "'");
    }
    throw Error(ErrorCode::kUnitMismatch, "unit '" + std::string(unit) +
                                              "' does not match the unit of '" + sub.path + "' ('" +
                                              sub.node->unit + "')");
  }
  return sub;
}

void aggregate_into(const MeasureNode& node, const std::string& path, LabelAggregate& agg) {
  auto kids = same_unit_children(node, path);
  double self = node.value - children_sum(kids);
  // Float accumulation may leave a tiny negative remainder.
  if (self < 0.0 && self >= -std::abs(node.value) * kSumSlack) self = 0.0;
  if (node.labels.empty()) {
    agg.entries[std::string(kUnlabeled)] += self;
  } else {
    double share = self / static_cast<double>(node.labels.size());
    for (const auto& label : node.labels) agg.entries[label] += share;
  }
  for (const auto& k : kids) aggregate_into(*k.node, k.path, agg);
}

SunburstNode build_sunburst(const MeasureNode& node, const std::string& path,
                            std::optional<double> parent_value) {
  SunburstNode out;
  out.path = path;
  out.name = node.name;
  out.value = node.value;
  out.labels = node.labels;
  if (parent_value) out.fraction = *parent_value == 0.0 ? 0.0 : node.value / *parent_value;
  auto kids = same_unit_children(node, path);
  out.self_value = node.value - children_sum(kids);
  out.children.reserve(kids.size());
  for (const auto& k : kids) out.children.push_back(build_sunburst(*k.node, k.path, node.value));
  return out;
}

std::string describe(const ValidationReport& violations) {
  std::string msg = "invalid measure tree:";
  for (const auto& v : violations) msg += " [" + v.path + ": " + v.message + "]";
  return msg;
}

}  // namespace

MeasureNode MeasureNode::leaf(std::string name, double value, std::string unit, LabelSet labels) {
  return MeasureNode{std::move(name), value, std::move(unit), std::move(labels), {}};
}

const MeasureNode* MeasureNode::child(std::string_view child_name) const {
  for (const auto& c : children) {
    if (c.name == child_name) return &c;
  }
  return nullptr;
}

ValidationError::ValidationError(ValidationReport violations)
    : Error(ErrorCode::kInvalidTree, describe(violations)), violations_(std::move(violations)) {}

ValidationReport validate_tree(const MeasureTree& tree) {
  ValidationReport out;
  if (tree.schema_version != kSchemaVersion) {
    out.push_back({tree.root.name, ViolationKind::kSchemaVersion, "unsupported schema version"});
  }
  validate_node(tree.root, tree.root.name, out);
  return out;
}

void require_valid(const MeasureTree& tree) {
  auto violations = validate_tree(tree);
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

bool is_valid_path(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.back() == '/') return false;
  return path.find("//") == std::string_view::npos;
}

std::string join_path(std::string_view parent, std::string_view name) {
  std::string out;
  out.reserve(parent.size() + 1 + name.size());
  out.append(parent).append("/").append(name);
  return out;
}

std::size_t path_depth(std::string_view path) {
  return static_cast<std::size_t>(std::count(path.begin(), path.end(), '/'));
}

std::vector<PathValue> flatten_paths(const MeasureTree& tree) {
  require_valid(tree);
  std::vector<PathValue> out;
  flatten_into(tree.root, tree.root.name, out);
  return out;
}

MeasureTree rebuild_tree(std::span<const PathValue> entries) {
  if (entries.empty()) throw Error(ErrorCode::kEmptyInput, "no entries to rebuild from");
  MeasureTree tree;
  const auto& first = entries.front();
  if (path_depth(first.path) != 0) {
    throw Error(ErrorCode::kBadRequest, "first entry must be the root, got '" + first.path + "'");
  }
  tree.root = MeasureNode::leaf(first.path, first.value, first.unit, first.labels);

  // Stack of the current ancestor chain.
  std::vector<MeasureNode*> chain{&tree.root};
  for (const auto& e : entries.subspan(1)) {
    if (!is_valid_path(e.path)) throw Error(ErrorCode::kBadRequest, "malformed path '" + e.path + "'");
    std::size_t depth = path_depth(e.path);
    if (depth == 0 || depth > chain.size()) {
      throw Error(ErrorCode::kBadRequest, "entry '" + e.path + "' is out of pre-order");
    }
    chain.resize(depth);
    auto slash = e.path.rfind('/');
    MeasureNode* parent = chain.back();
    parent->children.push_back(
        MeasureNode::leaf(e.path.substr(slash + 1), e.value, e.unit, e.labels));
    chain.push_back(&parent->children.back());
  }
  return tree;
}

const MeasureNode* find_node(const MeasureTree& tree, std::string_view path) {
  if (!is_valid_path(path)) return nullptr;
  auto take_segment = [&path]() {
    auto slash = path.find('/');
    std::string_view seg = path.substr(0, slash);
    path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
    return seg;
  };
  if (take_segment() != tree.root.name) return nullptr;
  const MeasureNode* node = &tree.root;
  while (node != nullptr && !path.empty()) node = node->child(take_segment());
  return node;
}

double LabelAggregate::total() const {
  return std::accumulate(entries.begin(), entries.end(), 0.0,
                         [](double acc, const auto& kv) { return acc + kv.second; });
}

LabelAggregate aggregate_by_label(const MeasureTree& tree, std::string_view unit,
                                  std::string_view at_path) {
  auto sub = resolve_subtree(tree, at_path, unit);
  LabelAggregate agg;
  agg.unit = std::string(unit);
  aggregate_into(*sub.node, sub.path, agg);
  return agg;
}

SunburstNode sunburst(const MeasureTree& tree, std::string_view unit, std::string_view at_path) {
  auto sub = resolve_subtree(tree, at_path, unit);
  return build_sunburst(*sub.node, sub.path, std::nullopt);
}

}  // namespace perfwatch
