// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/run_record.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <memory>

#include "perfwatch/report.hpp"

extern char** environ;

namespace perfwatch {

namespace {

using json = nlohmann::json;

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::int64_t parse_count(const StringMap& env, const char* key) {
  auto it = env.find(key);
  if (it == env.end()) return 1;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size() || v < 1) return 1;
  return v;
}

std::string first_of(const StringMap& env, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (auto it = env.find(k); it != env.end() && !it->second.empty()) return it->second;
  }
  return {};
}

StringMap string_map(const json& j, const char* key) {
  StringMap out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_object()) throw Error(ErrorCode::kSyntax, std::string("'") + key + "' must be an object");
  for (const auto& [k, v] : it->items()) {
    if (!v.is_string()) throw Error(ErrorCode::kSyntax, std::string("'") + key + "' values must be strings");
    out[k] = v.get<std::string>();
  }
  return out;
}

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::kSyntax, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

bool EnvAllowlist::allows(std::string_view variable) const {
  for (const auto& p : prefixes) {
    if (variable.starts_with(p)) return true;
  }
  for (const auto& n : names) {
    if (variable == n) return true;
  }
  return false;
}

StringMap EnvAllowlist::filter(const StringMap& env) const {
  StringMap out;
  for (const auto& [k, v] : env) {
    if (allows(k)) out.emplace(k, v);
  }
  return out;
}

std::string compute_run_id(std::string_view case_name, std::string_view commit,
                           Timestamp started_at, std::string_view job_id) {
  // Length-prefixed so that field boundaries cannot be shifted.
  std::string material;
  auto append = [&material](std::string_view field) {
    material.append(std::to_string(field.size())).push_back(':');
    material.append(field);
  };
  append(case_name);
  append(commit);
  append(started_at.iso8601());
  append(job_id);
  return sha256_hex(material);
}

RunRecord enrich(MeasureTree tree, std::string case_name, std::int64_t iteration,
                 const StringMap& environment, const RunContext& context,
                 const EnvAllowlist& allowlist, const Clock& clock) {
  require_valid(tree);
  RunRecord record;
  record.case_name = std::move(case_name);
  record.iteration = iteration;
  record.tree = std::move(tree);

  RunMeta& meta = record.meta;
  meta.commit = context.commit;
  meta.branch = context.branch;
  meta.pipeline_id = context.pipeline_id;
  meta.job_id = context.job_id;
  meta.node_count = std::max<std::int64_t>(1, context.node_count);
  meta.task_count = std::max<std::int64_t>(1, context.task_count);
  meta.env = allowlist.filter(environment);
  meta.build = context.build;
  meta.platform = context.platform;
  meta.started_at = context.started_at;
  meta.finished_at = std::max(context.finished_at, context.started_at);

  record.run_id = compute_run_id(record.case_name, meta.commit, meta.started_at, meta.job_id);
  record.ingested_at = std::max(clock(), meta.started_at);
  return record;
}

StringMap capture_environment() {
  StringMap env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return env;
}

RunContext context_from_environment(const StringMap& environment) {
  RunContext ctx;
  ctx.commit = first_of(environment, {"CI_COMMIT_SHA"});
  ctx.branch = first_of(environment, {"CI_COMMIT_BRANCH", "CI_COMMIT_REF_NAME"});
  ctx.pipeline_id = first_of(environment, {"CI_PIPELINE_ID"});
  ctx.job_id = first_of(environment, {"SLURM_JOB_ID", "CI_JOB_ID"});
  ctx.node_count = parse_count(environment, "SLURM_NNODES");
  ctx.task_count = parse_count(environment, "SLURM_NTASKS");
  ctx.platform = first_of(environment, {"SLURM_CLUSTER_NAME", "HOSTNAME"});
  return ctx;
}

json to_json(const RunMeta& meta) {
  return json{{"commit", meta.commit},
              {"branch", meta.branch},
              {"pipeline_id", meta.pipeline_id},
              {"job_id", meta.job_id},
              {"node_count", meta.node_count},
              {"task_count", meta.task_count},
              {"env", meta.env},
              {"build", meta.build},
              {"platform", meta.platform},
              {"started_at", meta.started_at.iso8601()},
              {"finished_at", meta.finished_at.iso8601()}};
}

RunMeta meta_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSyntax, "'meta' must be an object");
  RunMeta meta;
  meta.commit = string_field(j, "commit");
  meta.branch = string_field(j, "branch");
  meta.pipeline_id = string_field(j, "pipeline_id");
  meta.job_id = string_field(j, "job_id");
  for (auto [key, target] : {std::pair{"node_count", &meta.node_count},
                             std::pair{"task_count", &meta.task_count}}) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number_integer()) throw Error(ErrorCode::kSyntax, std::string("'") + key + "' must be an integer");
      *target = it->get<std::int64_t>();
    }
  }
  meta.env = string_map(j, "env");
  meta.build = string_map(j, "build");
  meta.platform = string_field(j, "platform");
  if (auto s = string_field(j, "started_at"); !s.empty()) meta.started_at = Timestamp::parse(s);
  if (auto s = string_field(j, "finished_at"); !s.empty()) meta.finished_at = Timestamp::parse(s);
  return meta;
}

std::string serialize_record(const RunRecord& record) {
  json doc{{"schema_version", record.tree.schema_version},
           {"run_id", record.run_id},
           {"case", record.case_name},
           {"iteration", record.iteration},
           {"measures", to_json(record.tree.root)},
           {"meta", to_json(record.meta)},
           {"ingested_at", record.ingested_at.iso8601()}};
  return doc.dump();
}

RunRecord parse_record(std::string_view bytes) {
  Report report = parse_report(bytes);
  json doc = json::parse(bytes.begin(), bytes.end());
  RunRecord record;
  record.run_id = string_field(doc, "run_id");
  record.case_name = std::move(report.case_name);
  record.iteration = report.iteration;
  record.tree = std::move(report.tree);
  if (auto it = doc.find("meta"); it != doc.end()) record.meta = meta_from_json(*it);
  if (auto s = string_field(doc, "ingested_at"); !s.empty()) record.ingested_at = Timestamp::parse(s);
  return record;
}

void check_record(const RunRecord& record) {
  auto bad = [](const std::string& what) { return Error(ErrorCode::kBadRequest, what); };
  if (record.run_id.empty()) throw bad("record has no run_id");
  for (char c : record.run_id) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) throw bad("run_id must be lowercase hex");
  }
  if (record.case_name.empty()) throw bad("record has no case");
  if (record.iteration < 0) throw bad("negative iteration");
  if (record.meta.node_count < 1 || record.meta.task_count < 1) throw bad("node/task counts must be >= 1");
  if (record.meta.finished_at < record.meta.started_at) throw bad("finished_at precedes started_at");
  if (record.ingested_at < record.meta.started_at) throw bad("ingested_at precedes started_at");
  require_valid(record.tree);
}

}  // namespace perfwatch
