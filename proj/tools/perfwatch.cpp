// SPDX-License-Identifier: Apache-2.0
//
// perfwatch command line:
//   perfwatch ingest <report-file> [--case X --commit H --store DIR]
//   perfwatch analyze series --case X --path P [--json]
//   perfwatch analyze gate --run ID            exit 0 pass, 10 warn, 20 fail
//   perfwatch campaign run --config FILE [--commit H --branch B --pipeline-id P]
//   perfwatch serve --store DIR --bind HOST:PORT --diff-cmd TEMPLATE
// Any internal error exits with 1.
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "perfwatch/api.hpp"
#include "perfwatch/campaign.hpp"
#include "perfwatch/config.hpp"
#include "perfwatch/gate.hpp"
#include "perfwatch/report.hpp"
#include "perfwatch/store.hpp"

namespace {

using namespace perfwatch;
namespace fs = std::filesystem;

std::string default_store() {
  const char* env = std::getenv("PERFWATCH_STORE");
  return env != nullptr && *env != '\0' ? env : "perfwatch-store";
}

AnalysisConfig analysis_from(const std::string& config_path) {
  return config_path.empty() ? AnalysisConfig{} : load_analysis_config(config_path);
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct IngestOptions {
  std::string report_file;
  std::string store = default_store();
  std::string case_name;
  std::string commit;
  std::string branch;
  std::string pipeline_id;
  std::string job_id;
  std::string started_at;
  std::vector<std::string> env_names;
};

int cmd_ingest(const IngestOptions& o) {
  ReportOverrides overrides;
  if (!o.case_name.empty()) overrides.case_name = o.case_name;
  Report report = parse_report(read_all(o.report_file), overrides);

  StringMap environment = capture_environment();
  RunContext ctx = context_from_environment(environment);
  if (!o.commit.empty()) ctx.commit = o.commit;
  if (!o.branch.empty()) ctx.branch = o.branch;
  if (!o.pipeline_id.empty()) ctx.pipeline_id = o.pipeline_id;
  if (!o.job_id.empty()) ctx.job_id = o.job_id;
  ctx.started_at = o.started_at.empty() ? Timestamp::now() : Timestamp::parse(o.started_at);
  ctx.finished_at = ctx.started_at;

  EnvAllowlist allow;
  allow.names = o.env_names;
  RunRecord record = enrich(std::move(report.tree), report.case_name, report.iteration, environment, ctx, allow);
  Store store = Store::open(o.store, Store::Mode::kWrite);
  std::cout << store.store_run(record) << '\n';
  return 0;
}

struct SeriesOptions {
  std::string store = default_store();
  std::string case_name;
  std::string path;
  std::string unit;
  std::string branch;
  std::size_t limit = 0;
  std::string config;
  bool json = false;
};

int cmd_series(const SeriesOptions& o) {
  AnalysisConfig analysis = analysis_from(o.config);
  Store store = Store::open(o.store, Store::Mode::kRead);
  SeriesFilter filter;
  if (!o.branch.empty()) filter.branch = o.branch;
  if (o.limit > 0) filter.limit = o.limit;
  Series s = store.query_series(o.case_name, o.path, o.unit, filter);
  auto values = s.values();
  auto assessments = assess_series(values, analysis.gate.classify);
  auto shifts = detect_shifts(values, analysis.shifts);

  if (o.json) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      points.push_back({{"run_id", s.points[i].run_id},
                        {"started_at", s.points[i].started_at.iso8601()},
                        {"value", s.points[i].value},
                        {"class", to_json(assessments[i].cls)}});
    }
    nlohmann::json cps = nlohmann::json::array();
    for (const auto& cp : shifts) cps.push_back(to_json(cp));
    nlohmann::json doc{{"case", s.case_name}, {"path", s.path},         {"unit", s.unit},
                       {"points", points},    {"change_points", cps}, {"params", to_json(analysis)}};
    std::cout << doc.dump(2) << '\n';
    return 0;
  }

  std::cout << s.case_name << " " << s.path << " [" << s.unit << "] " << s.points.size() << " points\n";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    std::cout << std::setw(4) << i << "  " << p.started_at.iso8601() << "  " << p.run_id.substr(0, 12) << "  "
              << std::setw(14) << p.value << "  " << to_string(kind_of(assessments[i].cls)) << '\n';
  }
  for (const auto& cp : shifts) {
    std::cout << "change point at " << cp.index << ": " << cp.before_median << " -> " << cp.after_median
              << " (score " << cp.score << ")\n";
  }
  return 0;
}

int cmd_gate(const std::string& store_dir, const std::string& run_id, const std::string& config, bool as_json) {
  AnalysisConfig analysis = analysis_from(config);
  Store store = Store::open(store_dir, Store::Mode::kRead);
  GateVerdict verdict = gate(store, run_id, analysis.gate);
  if (as_json) {
    std::cout << to_json(verdict).dump(2) << '\n';
  } else {
    std::cout << to_string(verdict.kind) << '\n';
    for (const auto& r : verdict.reasons) {
      std::cout << "  " << r.path << ": " << to_string(kind_of(r.cls)) << ", " << r.note << ", change "
                << r.relative_change * 100.0 << "%\n";
      if (r.attribution) {
        for (const auto& e : r.attribution->entries) {
          std::cout << "    " << e.label << " " << e.delta << " (share " << e.share << ")\n";
        }
      }
    }
  }
  return exit_code(verdict.kind);
}

struct CampaignOptions {
  std::string config;
  std::string commit;
  std::string branch;
  std::string pipeline_id;
  std::string job_id;
};

int cmd_campaign(const CampaignOptions& o) {
  CampaignConfig config = load_campaign_config(o.config);
  RunContext env_ctx = context_from_environment(capture_environment());
  CampaignContext ctx{o.commit.empty() ? env_ctx.commit : o.commit, o.branch.empty() ? env_ctx.branch : o.branch,
                      o.pipeline_id.empty() ? env_ctx.pipeline_id : o.pipeline_id,
                      o.job_id.empty() ? env_ctx.job_id : o.job_id};
  CampaignResult result = run_campaign(config, ctx);
  for (const auto& c : result.cases) {
    std::cout << c.name << ": ";
    if (!c.run_ok) {
      std::cout << "failed (" << c.error << ")\n";
    } else {
      std::cout << to_string(c.verdict->kind) << '\n';
    }
  }
  if (!result.error.empty()) std::cerr << "perfwatch: " << result.error << '\n';
  std::cout << "exit " << result.exit_code << '\n';
  return result.exit_code;
}

struct ServeOptions {
  std::string store = default_store();
  std::string bind = "127.0.0.1:8080";
  std::string diff_cmd;
  std::string config;
  std::string static_dir;
};

int cmd_serve(const ServeOptions& o) {
  auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kBadRequest, "--bind expects HOST:PORT");
  int port = std::stoi(o.bind.substr(colon + 1));
  ApiConfig config;
  config.store_dir = o.store;
  config.diff_command = o.diff_cmd;
  config.analysis = analysis_from(o.config);
  config.static_dir = o.static_dir;
  std::cerr << "perfwatch: serving " << o.store << " on " << o.bind << '\n';
  serve(std::move(config), o.bind.substr(0, colon), port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performance history, regression gate and API for CI campaigns"};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Store one report file as a run");
  ingest_cmd->add_option("report-file", ingest.report_file)->required();
  ingest_cmd->add_option("--store", ingest.store, "Store directory");
  ingest_cmd->add_option("--case", ingest.case_name, "Override the case name");
  ingest_cmd->add_option("--commit", ingest.commit);
  ingest_cmd->add_option("--branch", ingest.branch);
  ingest_cmd->add_option("--pipeline-id", ingest.pipeline_id);
  ingest_cmd->add_option("--job-id", ingest.job_id);
  ingest_cmd->add_option("--started-at", ingest.started_at, "UTC start time, YYYY-MM-DDTHH:MM:SSZ");
  ingest_cmd->add_option("--env", ingest.env_names, "Extra environment variable to record");
  ingest_cmd->callback([&] { action = [&] { return cmd_ingest(ingest); }; });

  auto* analyze_cmd = app.add_subcommand("analyze", "Inspect history");
  analyze_cmd->require_subcommand(1);

  SeriesOptions series;
  auto* series_cmd = analyze_cmd->add_subcommand("series", "Print a series with annotations");
  series_cmd->add_option("--store", series.store);
  series_cmd->add_option("--case", series.case_name)->required();
  series_cmd->add_option("--path", series.path)->required();
  series_cmd->add_option("--unit", series.unit);
  series_cmd->add_option("--branch", series.branch);
  series_cmd->add_option("--limit", series.limit);
  series_cmd->add_option("--config", series.config, "Analysis parameters (YAML)");
  series_cmd->add_flag("--json", series.json);
  series_cmd->callback([&] { action = [&] { return cmd_series(series); }; });

  std::string gate_store = default_store();
  std::string gate_run;
  std::string gate_config;
  bool gate_json = false;
  auto* gate_cmd = analyze_cmd->add_subcommand("gate", "Gate a stored run (exit 0/10/20)");
  gate_cmd->add_option("--store", gate_store);
  gate_cmd->add_option("--run", gate_run)->required();
  gate_cmd->add_option("--config", gate_config, "Analysis parameters (YAML)");
  gate_cmd->add_flag("--json", gate_json);
  gate_cmd->callback([&] { action = [&] { return cmd_gate(gate_store, gate_run, gate_config, gate_json); }; });

  CampaignOptions campaign;
  auto* campaign_cmd = app.add_subcommand("campaign", "Run simulation campaigns");
  campaign_cmd->require_subcommand(1);
  auto* run_cmd = campaign_cmd->add_subcommand("run", "Build, run, ingest and gate every case");
  run_cmd->add_option("--config", campaign.config)->required();
  run_cmd->add_option("--commit", campaign.commit);
  run_cmd->add_option("--branch", campaign.branch);
  run_cmd->add_option("--pipeline-id", campaign.pipeline_id);
  run_cmd->add_option("--job-id", campaign.job_id);
  run_cmd->callback([&] { action = [&] { return cmd_campaign(campaign); }; });

  ServeOptions serve_opts;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--store", serve_opts.store);
  serve_cmd->add_option("--bind", serve_opts.bind, "HOST:PORT");
  serve_cmd->add_option("--diff-cmd", serve_opts.diff_cmd, "Command template with {from} and {to}");
  serve_cmd->add_option("--config", serve_opts.config, "Analysis parameters (YAML)");
  serve_cmd->add_option("--static", serve_opts.static_dir, "Directory served at /");
  serve_cmd->callback([&] { action = [&] { return cmd_serve(serve_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInfrastructureExitCode;
  }

  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "perfwatch: " << e.what() << '\n';
    return kInfrastructureExitCode;
  }
}
