// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/campaign.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "perfwatch/command.hpp"
#include "perfwatch/report.hpp"
#include "perfwatch/store.hpp"

namespace perfwatch {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kOutputTail = 4096;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

std::string required_string(const YAML::Node& node, const char* key, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v || !v.IsScalar() || v.as<std::string>().empty()) config_error(where + ": missing '" + key + "'");
  return v.as<std::string>();
}

std::string optional_string(const YAML::Node& node, const char* key, std::string fallback = {}) {
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  if (!v.IsScalar()) config_error(std::string("'") + key + "' must be a string");
  return v.as<std::string>();
}

template <typename Int>
Int positive_int(const YAML::Node& node, const char* key, Int fallback, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  long long n = 0;
  try {
    n = v.as<long long>();
  } catch (const YAML::Exception&) {
    config_error(where + ": '" + key + "' must be an integer");
  }
  if (n < 1) config_error(where + ": '" + key + "' must be > 0");
  return static_cast<Int>(n);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

bool inside(const fs::path& dir, const fs::path& p) {
  auto d = dir.lexically_normal();
  auto rel = p.lexically_normal().lexically_relative(d);
  return !rel.empty() && *rel.begin() != ".." && rel != ".";
}

std::string tail(const std::string& s) {
  return s.size() > kOutputTail ? s.substr(s.size() - kOutputTail) : s;
}

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs one iteration of a case; returns the stored run id. Any failure
// throws, and nothing is stored unless the report parsed and validated.
std::string run_iteration(const CampaignConfig& config, const CaseSpec& spec, int iteration,
                          const CampaignContext& context, const CampaignHooks& hooks, Store& store,
                          const StringMap& environment) {
  fs::path report = report_location(spec, iteration);
  std::error_code ec;
  fs::remove(report, ec);
  fs::create_directories(report.parent_path(), ec);

  Bindings bindings{{"case", spec.name},
                    {"workdir", spec.workdir.string()},
                    {"report", report.string()},
                    {"iteration", std::to_string(iteration)}};
  auto argv = render_command(spec.run_command, bindings);

  Timestamp started = hooks.clock();
  ProcessResult proc = run_process(argv, {spec.workdir, spec.timeout, 64 * 1024});
  Timestamp finished = hooks.clock();
  if (proc.timed_out) {
    throw Error(ErrorCode::kIo, "timed out after " + std::to_string(spec.timeout.count()) + "s");
  }
  if (proc.exit_code != 0) {
    throw Error(ErrorCode::kIo, "exited with status " + std::to_string(proc.exit_code) + ": " + tail(proc.output));
  }

  auto bytes = read_file(report);
  if (!bytes) throw Error(ErrorCode::kNotFound, "report '" + report.string() + "' was not produced");
  Report parsed = parse_report(*bytes, ReportOverrides{spec.name, std::nullopt});

  RunContext ctx;
  ctx.commit = context.commit;
  ctx.branch = context.branch;
  ctx.pipeline_id = context.pipeline_id;
  ctx.job_id = context.job_id;
  ctx.node_count = spec.nodes;
  ctx.task_count = spec.tasks;
  ctx.build = config.build_info;
  ctx.platform = config.platform;
  ctx.started_at = started;
  ctx.finished_at = finished;

  RunRecord record = enrich(std::move(parsed.tree), parsed.case_name, parsed.iteration, environment, ctx,
                            config.env_allowlist, hooks.clock);
  return store.store_run(record);
}

void write_summary(const CampaignResult& result, const CampaignContext& context) {
  json doc = to_json(result);
  doc["commit"] = context.commit;
  doc["branch"] = context.branch;
  doc["pipeline_id"] = context.pipeline_id;
  std::ofstream out(result.summary_file, std::ios::trunc);
  out << doc.dump(2) << '\n';
}

}  // namespace

CampaignConfig parse_campaign_config(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    config_error(std::string("campaign config: ") + e.what());
  }
  if (!root.IsMap()) config_error("campaign config must be a mapping");

  static const std::set<std::string> kKnown{"store_dir",  "summary_file", "notify_command", "platform",
                                            "build_info", "env_allowlist", "analysis",     "build_steps",
                                            "cases"};
  for (const auto& kv : root) {
    if (!kKnown.contains(kv.first.as<std::string>()))
      config_error("unknown campaign key '" + kv.first.as<std::string>() + "'");
  }

  CampaignConfig config;
  config.store_dir = resolve(base_dir, required_string(root, "store_dir", "campaign"));
  config.summary_file = resolve(base_dir, optional_string(root, "summary_file", "campaign-summary.json"));
  if (auto notify = optional_string(root, "notify_command"); !notify.empty()) config.notify_command = notify;
  config.platform = optional_string(root, "platform");

  if (const YAML::Node info = root["build_info"]; info && !info.IsNull()) {
    if (!info.IsMap()) config_error("'build_info' must be a mapping");
    for (const auto& kv : info) config.build_info[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }

  if (const YAML::Node allow = root["env_allowlist"]; allow && !allow.IsNull()) {
    if (!allow.IsSequence()) config_error("'env_allowlist' must be a list");
    config.env_allowlist.prefixes.clear();
    for (const auto& item : allow) {
      auto entry = item.as<std::string>();
      if (!entry.empty() && entry.back() == '*') {
        config.env_allowlist.prefixes.push_back(entry.substr(0, entry.size() - 1));
      } else {
        config.env_allowlist.names.push_back(entry);
      }
    }
  }

  try {
    apply_analysis_keys(root["analysis"], config.analysis);
  } catch (const YAML::Exception& e) {
    config_error(std::string("analysis: ") + e.what());
  }

  if (const YAML::Node steps = root["build_steps"]; steps && !steps.IsNull()) {
    if (!steps.IsSequence()) config_error("'build_steps' must be a list");
    for (const auto& s : steps) {
      BuildStep step;
      step.name = required_string(s, "name", "build step");
      std::string where = "build step '" + step.name + "'";
      step.command = required_string(s, "command", where);
      step.workdir = resolve(base_dir, optional_string(s, "workdir", "."));
      step.timeout = std::chrono::seconds(positive_int<long long>(s, "timeout", 3600, where));
      config.build_steps.push_back(std::move(step));
    }
  }

  const YAML::Node cases = root["cases"];
  if (!cases || !cases.IsSequence() || cases.size() == 0) config_error("'cases' must be a non-empty list");
  std::set<std::string> names;
  for (const auto& c : cases) {
    CaseSpec spec;
    spec.name = required_string(c, "name", "case");
    std::string where = "case '" + spec.name + "'";
    if (!names.insert(spec.name).second) config_error("duplicate case name '" + spec.name + "'");
    spec.run_command = required_string(c, "run_command", where);
    spec.workdir = resolve(base_dir, optional_string(c, "workdir", "."));
    spec.report_path = optional_string(c, "report_path", "{workdir}/report.json");
    spec.timeout = std::chrono::seconds(positive_int<long long>(c, "timeout", 3600, where));
    spec.expected_iterations = positive_int<int>(c, "expected_iterations", 1, where);
    spec.nodes = positive_int<std::int64_t>(c, "nodes", 1, where);
    spec.tasks = positive_int<std::int64_t>(c, "tasks", 1, where);
    AnalysisConfig per_case = config.analysis;
    try {
      apply_analysis_keys(c["gate"], per_case);
    } catch (const YAML::Exception& e) {
      config_error(where + ": " + e.what());
    }
    spec.gate = per_case.gate;

    for (int i = 0; i < spec.expected_iterations; ++i) {
      fs::path report;
      try {
        report = report_location(spec, i);
      } catch (const Error& e) {
        config_error(where + ": report_path: " + e.what());
      }
      if (!inside(spec.workdir, report)) {
        config_error(where + ": report_path '" + report.string() + "' is outside the case workdir");
      }
    }
    config.cases.push_back(std::move(spec));
  }
  return config;
}

CampaignConfig load_campaign_config(const fs::path& path) {
  auto text = read_file(path);
  if (!text) config_error("cannot read config '" + path.string() + "'");
  fs::path base = fs::absolute(path).parent_path();
  return parse_campaign_config(*text, base);
}

fs::path report_location(const CaseSpec& spec, int iteration) {
  Bindings bindings{{"case", spec.name}, {"workdir", spec.workdir.string()}, {"iteration", std::to_string(iteration)}};
  return resolve(spec.workdir, expand_placeholders(spec.report_path, bindings));
}

CampaignResult run_campaign(const CampaignConfig& config, const CampaignContext& context,
                            const CampaignHooks& hooks) {
  CampaignResult result;
  result.summary_file = config.summary_file;
  StringMap environment = hooks.environment ? *hooks.environment : capture_environment();

  std::optional<Store> store;
  try {
    store = Store::open(config.store_dir, Store::Mode::kWrite);
  } catch (const Error& e) {
    result.error = e.what();
    result.exit_code = kInfrastructureExitCode;
  }

  if (store) {
    for (const auto& step : config.build_steps) {
      StepResult sr;
      sr.name = step.name;
      try {
        auto argv = render_command(step.command, Bindings{{"workdir", step.workdir.string()}});
        ProcessResult proc = run_process(argv, {step.workdir, step.timeout, 64 * 1024});
        sr.exit_code = proc.exit_code;
        sr.timed_out = proc.timed_out;
        sr.ok = proc.ok();
        sr.output_tail = tail(proc.output);
      } catch (const Error& e) {
        sr.output_tail = e.what();
      }
      result.builds.push_back(sr);
      if (!sr.ok) {
        result.build_ok = false;
        result.error = "build step '" + step.name + "' failed";
        result.exit_code = kInfrastructureExitCode;
        break;
      }
    }
  }

  if (store && result.build_ok) {
    bool infrastructure_failure = false;
    int worst = 0;
    for (const auto& spec : config.cases) {
      CaseResult cr;
      cr.name = spec.name;
      try {
        for (int i = 0; i < spec.expected_iterations; ++i) {
          cr.run_ids.push_back(run_iteration(config, spec, i, context, hooks, *store, environment));
          GateVerdict v = gate(*store, cr.run_ids.back(), spec.gate);
          if (!cr.verdict || v.kind >= cr.verdict->kind) cr.verdict = std::move(v);
        }
        cr.run_ok = true;
        cr.exit_code = exit_code(cr.verdict->kind);
        worst = std::max(worst, cr.exit_code);
      } catch (const std::exception& e) {
        cr.error = e.what();
        cr.exit_code = kInfrastructureExitCode;
        infrastructure_failure = true;
      }
      result.cases.push_back(std::move(cr));
    }
    result.exit_code = infrastructure_failure ? kInfrastructureExitCode : worst;
  }
  store.reset();

  try {
    write_summary(result, context);
  } catch (const std::exception& e) {
    std::cerr << "perfwatch: cannot write summary: " << e.what() << '\n';
  }
  if (config.notify_command) {
    try {
      auto argv = render_command(*config.notify_command, Bindings{{"summary", config.summary_file.string()}});
      ProcessResult proc = run_process(argv, {config.summary_file.parent_path(), std::chrono::seconds(60), 4096});
      if (!proc.ok()) std::cerr << "perfwatch: notify command failed (status " << proc.exit_code << ")\n";
    } catch (const std::exception& e) {
      std::cerr << "perfwatch: notify command failed: " << e.what() << '\n';
    }
  }
  return result;
}

json to_json(const CampaignResult& result) {
  json builds = json::array();
  for (const auto& b : result.builds) {
    builds.push_back({{"name", b.name},
                      {"ok", b.ok},
                      {"exit_code", b.exit_code},
                      {"timed_out", b.timed_out},
                      {"output_tail", b.output_tail}});
  }
  json cases = json::array();
  for (const auto& c : result.cases) {
    json jc{{"name", c.name}, {"run_ok", c.run_ok}, {"run_ids", c.run_ids}, {"exit_code", c.exit_code}};
    jc["verdict"] = c.verdict ? to_json(*c.verdict) : json(nullptr);
    if (!c.error.empty()) jc["error"] = c.error;
    cases.push_back(std::move(jc));
  }
  json j{{"schema_version", kSchemaVersion},
         {"build_ok", result.build_ok},
         {"builds", std::move(builds)},
         {"cases", std::move(cases)},
         {"exit_code", result.exit_code}};
  if (!result.error.empty()) j["error"] = result.error;
  return j;
}

}  // namespace perfwatch
