// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

namespace perfwatch {

namespace {

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::kConfig, "invalid value for '" + key + "'");
  }
}

std::size_t positive(const YAML::Node& node, const std::string& key) {
  auto v = scalar<long long>(node, key);
  if (v < 1) throw Error(ErrorCode::kConfig, "'" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

double non_negative(const YAML::Node& node, const std::string& key) {
  auto v = scalar<double>(node, key);
  if (!(v >= 0.0)) throw Error(ErrorCode::kConfig, "'" + key + "' must be >= 0");
  return v;
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) throw Error(ErrorCode::kConfig, "'" + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& item : node) out.push_back(scalar<std::string>(item, key));
  return out;
}

}  // namespace

void apply_analysis_keys(const YAML::Node& node, AnalysisConfig& config) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) throw Error(ErrorCode::kConfig, "analysis parameters must be a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    if (key == "window") {
      config.gate.classify.window = positive(v, key);
    } else if (key == "k") {
      config.gate.classify.k = non_negative(v, key);
    } else if (key == "persistence") {
      config.gate.classify.persistence = positive(v, key);
    } else if (key == "rel_floor") {
      config.gate.classify.rel_floor = non_negative(v, key);
    } else if (key == "fail_ratio") {
      config.gate.fail_ratio = non_negative(v, key);
    } else if (key == "watch_paths") {
      config.gate.watch_paths = string_list(v, key);
      for (const auto& p : config.gate.watch_paths) {
        if (!is_valid_path(p)) throw Error(ErrorCode::kConfig, "malformed watch path '" + p + "'");
      }
    } else if (key == "higher_is_better") {
      auto list = string_list(v, key);
      config.gate.higher_is_better = {list.begin(), list.end()};
    } else if (key == "min_seg") {
      config.shifts.min_seg = positive(v, key);
    } else if (key == "accept") {
      config.shifts.accept = non_negative(v, key);
    } else if (key == "max_depth") {
      config.shifts.max_depth = positive(v, key);
    } else {
      throw Error(ErrorCode::kConfig, "unknown analysis key '" + key + "'");
    }
  }
}

AnalysisConfig parse_analysis_config(const std::string& yaml_text) {
  AnalysisConfig config;
  try {
    apply_analysis_keys(YAML::Load(yaml_text), config);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, std::string("analysis config: ") + e.what());
  }
  return config;
}

AnalysisConfig load_analysis_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_analysis_config(ss.str());
}

nlohmann::json to_json(const AnalysisConfig& config) {
  nlohmann::json j = to_json(config.gate);
  nlohmann::json shifts = to_json(config.shifts);
  for (auto& [k, v] : shifts.items()) j[k] = v;
  return j;
}

}  // namespace perfwatch
