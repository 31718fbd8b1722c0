// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/report.hpp"

namespace perfwatch {

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kSyntax, (where.empty() ? std::string("report") : "node '" + where + "'") +
                                      ": " + what);
}

MeasureNode parse_node(const json& j, const std::string& parent_path,
                       std::map<std::string, json>* unknown) {
  if (!j.is_object()) schema_error(parent_path, "measure node must be an object");

  MeasureNode node;
  auto name_it = j.find("name");
  if (name_it == j.end() || !name_it->is_string()) schema_error(parent_path, "missing string 'name'");
  node.name = name_it->get<std::string>();
  std::string path = parent_path.empty() ? node.name : join_path(parent_path, node.name);

  auto value_it = j.find("value");
  if (value_it == j.end() || !value_it->is_number()) schema_error(path, "missing numeric 'value'");
  node.value = value_it->get<double>();

  auto unit_it = j.find("unit");
  if (unit_it == j.end() || !unit_it->is_string()) schema_error(path, "missing string 'unit'");
  node.unit = unit_it->get<std::string>();

  if (auto it = j.find("labels"); it != j.end()) {
    if (!it->is_array()) schema_error(path, "'labels' must be an array");
    for (const auto& label : *it) {
      if (!label.is_string()) schema_error(path, "labels must be strings");
      node.labels.insert(label.get<std::string>());
    }
  }
  if (auto it = j.find("children"); it != j.end()) {
    if (!it->is_array()) schema_error(path, "'children' must be an array");
    node.children.reserve(it->size());
    for (const auto& c : *it) node.children.push_back(parse_node(c, path, unknown));
  }

  if (unknown != nullptr) {
    json extra = json::object();
    for (const auto& [key, val] : j.items()) {
      if (key != "name" && key != "value" && key != "unit" && key != "labels" && key != "children")
        extra[key] = val;
    }
    if (!extra.empty()) (*unknown)[path] = std::move(extra);
  }
  return node;
}

}  // namespace

json to_json(const MeasureNode& node) {
  json children = json::array();
  for (const auto& c : node.children) children.push_back(to_json(c));
  return json{{"name", node.name},
              {"value", node.value},
              {"unit", node.unit},
              {"labels", node.labels},
              {"children", std::move(children)}};
}

MeasureNode node_from_json(const json& j) { return parse_node(j, "", nullptr); }

Report parse_report(std::string_view bytes, const ReportOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSyntax,
                "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kSyntax, "report must be a JSON object");

  auto version_it = doc.find("schema_version");
  if (version_it == doc.end() || !version_it->is_number_integer()) {
    schema_error("", "missing integer 'schema_version'");
  }
  auto version = version_it->get<std::int64_t>();
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::kUnsupportedSchema,
                "unsupported schema version " + std::to_string(version));
  }

  Report report;
  if (auto it = doc.find("case"); it != doc.end()) {
    if (!it->is_string()) schema_error("", "'case' must be a string");
    report.case_name = it->get<std::string>();
  }
  if (auto it = doc.find("iteration"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      schema_error("", "'iteration' must be a non-negative integer");
    report.iteration = it->get<std::int64_t>();
  }
  if (overrides.case_name) report.case_name = *overrides.case_name;
  if (overrides.iteration) report.iteration = *overrides.iteration;
  if (report.case_name.empty()) schema_error("", "missing 'case'");

  auto measures_it = doc.find("measures");
  if (measures_it == doc.end()) schema_error("", "missing 'measures'");
  report.tree.root = parse_node(*measures_it, "", &report.unknown_keys);

  json top_extra = json::object();
  for (const auto& [key, val] : doc.items()) {
    if (key != "schema_version" && key != "case" && key != "iteration" && key != "measures")
      top_extra[key] = val;
  }
  if (!top_extra.empty()) report.unknown_keys[""] = std::move(top_extra);

  require_valid(report.tree);
  return report;
}

std::string serialize_report(const Report& report) {
  json doc{{"schema_version", report.tree.schema_version},
           {"case", report.case_name},
           {"iteration", report.iteration},
           {"measures", to_json(report.tree.root)}};
  return doc.dump();
}

json to_json(const SunburstNode& node) {
  json children = json::array();
  for (const auto& c : node.children) children.push_back(to_json(c));
  return json{{"path", node.path},         {"name", node.name},
              {"value", node.value},       {"fraction", node.fraction},
              {"self_value", node.self_value}, {"labels", node.labels},
              {"children", std::move(children)}};
}

json to_json(const LabelAggregate& agg) {
  json entries = json::object();
  for (const auto& [label, value] : agg.entries) entries[label] = value;
  return json{{"unit", agg.unit}, {"entries", std::move(entries)}, {"total", agg.total()}};
}

json to_json(const Violation& v) { return json{{"path", v.path}, {"message", v.message}}; }

}  // namespace perfwatch
