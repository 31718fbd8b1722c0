// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/api.hpp"

#include "httplib.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "perfwatch/command.hpp"
#include "perfwatch/report.hpp"

namespace perfwatch {

namespace {

using json = nlohmann::json;

constexpr const char* kJson = "application/json";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kLocked: return 503;
    case ErrorCode::kSyntax:
    case ErrorCode::kUnsupportedSchema:
    case ErrorCode::kInvalidTree:
    case ErrorCode::kUnknownUnit:
    case ErrorCode::kUnitMismatch:
    case ErrorCode::kBadRequest:
    case ErrorCode::kUnknownPlaceholder:
    case ErrorCode::kEmptyInput:
      return 400;
    default:
      return 500;
  }
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}};
}

ApiResponse from_error(const Error& e) {
  ApiResponse r = error_response(status_for(e.code()), to_string(e.code()), e.what());
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    json violations = json::array();
    for (const auto& x : v->violations()) violations.push_back(to_json(x));
    r.body["violations"] = std::move(violations);
  }
  return r;
}

template <typename Fn>
ApiResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return from_error(e);
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

std::optional<std::string> param(const QueryParams& q, const char* key) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::string required(const QueryParams& q, const char* key) {
  auto v = param(q, key);
  if (!v) throw Error(ErrorCode::kBadRequest, std::string("missing query parameter '") + key + "'");
  return *v;
}

std::optional<std::size_t> limit_param(const QueryParams& q) {
  auto v = param(q, "limit");
  if (!v) return std::nullopt;
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
  if (ec != std::errc() || ptr != v->data() + v->size() || n == 0) {
    throw Error(ErrorCode::kBadRequest, "'limit' must be a positive integer");
  }
  return n;
}

// Revisions go to an external command as argv entries; refuse anything that
// could be read as an option.
void check_revision(const std::string& rev) {
  bool ok = !rev.empty() && rev.size() <= 256 && rev.front() != '-';
  for (char c : rev) {
    ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '/' || c == '~' ||
                c == '^' || c == '-');
  }
  if (!ok) throw Error(ErrorCode::kBadRequest, "invalid revision '" + rev + "'");
}

json summary_json(const RunSummary& s) {
  return json{{"run_id", s.run_id},   {"case", s.case_name},   {"iteration", s.iteration},
              {"commit", s.commit},   {"branch", s.branch},    {"started_at", s.started_at.iso8601()}};
}

json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace

CompareResponse compare_runs(const RunRecord& a, const RunRecord& b) {
  CompareResponse out;
  out.run_a = a.run_id;
  out.run_b = b.run_id;
  out.commit_a = a.meta.commit;
  out.commit_b = b.meta.commit;

  auto flat_a = flatten_paths(a.tree);
  auto flat_b = flatten_paths(b.tree);
  std::map<std::string, const PathValue*> by_path_b;
  for (const auto& pv : flat_b) by_path_b.emplace(pv.path, &pv);

  std::vector<CompareRow> present;
  std::vector<CompareRow> other;
  for (const auto& pa : flat_a) {
    CompareRow row;
    row.path = pa.path;
    row.unit = pa.unit;
    row.value_a = pa.value;
    auto it = by_path_b.find(pa.path);
    if (it == by_path_b.end()) {
      row.status = "absent_in_b";
      other.push_back(std::move(row));
      continue;
    }
    const PathValue& pb = *it->second;
    by_path_b.erase(it);
    row.value_b = pb.value;
    if (pb.unit != pa.unit) {
      row.status = "unit_mismatch";
      other.push_back(std::move(row));
      continue;
    }
    row.status = "present";
    row.delta = pb.value - pa.value;
    if (pa.value != 0.0) {
      row.relative_delta = *row.delta / std::abs(pa.value);
    } else {
      row.relative_delta = *row.delta == 0.0 ? 0.0 : std::copysign(INFINITY, *row.delta);
    }
    present.push_back(std::move(row));
  }
  for (const auto& pb : flat_b) {
    if (!by_path_b.count(pb.path)) continue;
    CompareRow row;
    row.path = pb.path;
    row.unit = pb.unit;
    row.value_b = pb.value;
    row.status = "absent_in_a";
    other.push_back(std::move(row));
  }

  std::stable_sort(present.begin(), present.end(), [](const CompareRow& x, const CompareRow& y) {
    double rx = std::abs(*x.relative_delta);
    double ry = std::abs(*y.relative_delta);
    if (rx != ry) return rx > ry;
    double dx = std::abs(*x.delta);
    double dy = std::abs(*y.delta);
    if (dx != dy) return dx > dy;
    return x.path < y.path;
  });
  std::stable_sort(other.begin(), other.end(),
                   [](const CompareRow& x, const CompareRow& y) { return x.path < y.path; });
  out.rows = std::move(present);
  out.rows.insert(out.rows.end(), std::make_move_iterator(other.begin()), std::make_move_iterator(other.end()));
  return out;
}

json to_json(const CompareResponse& c) {
  json rows = json::array();
  for (const auto& r : c.rows) {
    json row{{"path", r.path},
             {"unit", r.unit},
             {"value_a", optional_number(r.value_a)},
             {"value_b", optional_number(r.value_b)},
             {"delta", optional_number(r.delta)},
             {"relative_delta", optional_number(r.relative_delta)},
             {"status", r.status}};
    if (r.status != "present") row["absent"] = r.status != "unit_mismatch";
    rows.push_back(std::move(row));
  }
  return json{{"run_a", c.run_a},
              {"run_b", c.run_b},
              {"commits", {{"a", c.commit_a}, {"b", c.commit_b}}},
              {"rows", std::move(rows)}};
}

ApiService::ApiService(ApiConfig config)
    : config_(std::move(config)), store_(Store::open(config_.store_dir, Store::Mode::kRead)) {}

ApiResponse ApiService::cases() {
  return guarded([&] {
    store_.refresh();
    return ApiResponse{200, json{{"cases", store_.cases()}}};
  });
}

ApiResponse ApiService::case_runs(const std::string& case_name, const QueryParams& query) {
  return guarded([&] {
    store_.refresh();
    SeriesFilter filter;
    filter.branch = param(query, "branch");
    filter.limit = limit_param(query);
    auto all = store_.cases();
    if (std::find(all.begin(), all.end(), case_name) == all.end()) {
      throw Error(ErrorCode::kNotFound, "unknown case '" + case_name + "'");
    }
    json runs = json::array();
    for (const auto& s : store_.runs(case_name, filter)) runs.push_back(summary_json(s));
    return ApiResponse{200, json{{"case", case_name}, {"runs", std::move(runs)}}};
  });
}

ApiResponse ApiService::run(const std::string& run_id) {
  return guarded([&] {
    store_.refresh();
    return ApiResponse{200, json::parse(store_.raw_record(run_id))};
  });
}

ApiResponse ApiService::labels(const std::string& run_id, const QueryParams& query) {
  return guarded([&] {
    store_.refresh();
    RunRecord record = store_.get_run(run_id);
    auto path = param(query, "path").value_or("");
    const MeasureNode* at = path.empty() ? &record.tree.root : find_node(record.tree, path);
    if (at == nullptr) throw Error(ErrorCode::kNotFound, "no node at path '" + path + "'");
    auto unit = param(query, "unit").value_or(at->unit);
    json body = to_json(aggregate_by_label(record.tree, unit, path));
    body["run_id"] = record.run_id;
    body["path"] = path.empty() ? record.tree.root.name : path;
    return ApiResponse{200, std::move(body)};
  });
}

ApiResponse ApiService::sunburst(const std::string& run_id, const QueryParams& query) {
  return guarded([&] {
    store_.refresh();
    RunRecord record = store_.get_run(run_id);
    auto path = param(query, "path").value_or("");
    const MeasureNode* at = path.empty() ? &record.tree.root : find_node(record.tree, path);
    if (at == nullptr) throw Error(ErrorCode::kNotFound, "no node at path '" + path + "'");
    auto unit = param(query, "unit").value_or(at->unit);
    return ApiResponse{200, json{{"run_id", record.run_id},
                                 {"unit", unit},
                                 {"root", to_json(perfwatch::sunburst(record.tree, unit, path))}}};
  });
}

ApiResponse ApiService::series(const QueryParams& query) {
  return guarded([&] {
    store_.refresh();
    auto case_name = required(query, "case");
    auto path = required(query, "path");
    SeriesFilter filter;
    filter.branch = param(query, "branch");
    filter.limit = limit_param(query);
    Series s = store_.query_series(case_name, path, param(query, "unit").value_or(""), filter);

    auto values = s.values();
    auto assessments = assess_series(values, config_.analysis.gate.classify);
    auto shifts = detect_shifts(values, config_.analysis.shifts);

    json points = json::array();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      points.push_back({{"run_id", s.points[i].run_id},
                        {"started_at", s.points[i].started_at.iso8601()},
                        {"value", s.points[i].value},
                        {"class", to_json(assessments[i].cls)}});
    }
    json change_points = json::array();
    for (const auto& cp : shifts) change_points.push_back(to_json(cp));
    return ApiResponse{200, json{{"case", s.case_name},
                                 {"path", s.path},
                                 {"unit", s.unit},
                                 {"points", std::move(points)},
                                 {"change_points", std::move(change_points)},
                                 {"params", to_json(config_.analysis)}}};
  });
}

ApiResponse ApiService::compare(const QueryParams& query) {
  return guarded([&] {
    store_.refresh();
    RunRecord a = store_.get_run(required(query, "a"));
    RunRecord b = store_.get_run(required(query, "b"));
    return ApiResponse{200, to_json(compare_runs(a, b))};
  });
}

ApiResponse ApiService::diff(const QueryParams& query) {
  return guarded([&] {
    auto from = required(query, "from");
    auto to = required(query, "to");
    check_revision(from);
    check_revision(to);
    if (config_.diff_command.empty()) {
      return error_response(501, "not_configured", "no diff command configured");
    }
    auto argv = render_command(config_.diff_command, Bindings{{"from", from}, {"to", to}});
    ProcessOptions options;
    options.timeout = config_.diff_timeout;
    options.max_output = 8 * 1024 * 1024;
    ProcessResult proc = run_process(argv, options);
    if (!proc.ok()) {
      ApiResponse r = error_response(502, "vcs_error", proc.output);
      r.body["exit_code"] = proc.exit_code;
      r.body["timed_out"] = proc.timed_out;
      return r;
    }
    return ApiResponse{200, json{{"from", from}, {"to", to}, {"diff", proc.output}}};
  });
}

ApiResponse ApiService::ingest(const std::string& body) {
  return guarded([&] {
    Report report = parse_report(body);
    json doc = json::parse(body);
    auto meta_it = doc.find("meta");
    if (meta_it == doc.end()) throw Error(ErrorCode::kBadRequest, "missing 'meta' object");
    RunMeta meta = meta_from_json(*meta_it);
    if (!meta_it->contains("started_at")) throw Error(ErrorCode::kBadRequest, "'meta.started_at' is required");

    RunContext ctx;
    ctx.commit = meta.commit;
    ctx.branch = meta.branch;
    ctx.pipeline_id = meta.pipeline_id;
    ctx.job_id = meta.job_id;
    ctx.node_count = meta.node_count;
    ctx.task_count = meta.task_count;
    ctx.build = meta.build;
    ctx.platform = meta.platform;
    ctx.started_at = meta.started_at;
    ctx.finished_at = meta.finished_at;
    RunRecord record = enrich(std::move(report.tree), report.case_name, report.iteration, meta.env, ctx,
                              config_.env_allowlist);

    std::lock_guard lock(ingest_mu_);
    bool existed = false;
    {
      Store writer = Store::open(config_.store_dir, Store::Mode::kWrite);
      existed = writer.contains(record.run_id);
      writer.store_run(record);
    }
    store_.refresh();
    return ApiResponse{existed ? 200 : 201, json{{"run_id", record.run_id}, {"created", !existed}}};
  });
}

void ApiService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), kJson);
  };

  server.Get("/api/v1/cases", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, cases());
  });
  server.Get(R"(/api/v1/cases/([^/]+)/runs)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, case_runs(req.matches[1], req.params));
  });
  server.Get(R"(/api/v1/runs/([0-9a-f]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, run(req.matches[1]));
  });
  server.Get(R"(/api/v1/runs/([0-9a-f]+)/labels)",
             [this, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, labels(req.matches[1], req.params));
             });
  server.Get(R"(/api/v1/runs/([0-9a-f]+)/sunburst)",
             [this, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, sunburst(req.matches[1], req.params));
             });
  server.Get("/api/v1/series", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, series(req.params));
  });
  server.Get("/api/v1/compare", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, compare(req.params));
  });
  server.Get("/api/v1/diff", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, diff(req.params));
  });
  server.Post("/api/v1/runs", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, ingest(req.body));
  });

  if (!config_.static_dir.empty()) server.set_mount_point("/", config_.static_dir.string());

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      res.set_content(json{{"code", "not_found"}, {"message", "no route for " + req.path}}.dump(), kJson);
    }
  });
}

void serve(ApiConfig config, const std::string& host, int port) {
  ApiService service(std::move(config));
  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  server.listen_after_bind();
}

}  // namespace perfwatch
