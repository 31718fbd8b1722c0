// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "fixtures.hpp"
#include "httplib.h"
#include "perfwatch/api.hpp"

using namespace perfwatch;
using namespace perfwatch::testing;
using nlohmann::json;

namespace {

class ApiTest : public ::testing::Test {
 protected:
  void seed(const std::string& case_name, const std::vector<MeasureTree>& trees, int first_index = 0) {
    auto store = Store::open(dir.path(), Store::Mode::kWrite);
    for (std::size_t i = 0; i < trees.size(); ++i) {
      ids.push_back(store.store_run(make_record(trees[i], case_name, first_index + static_cast<int>(i))));
    }
  }

  ApiService service(const std::string& diff = {}) {
    ApiConfig config;
    config.store_dir = dir.path();
    config.diff_command = diff;
    return ApiService(config);
  }

  TempDir dir;
  std::vector<std::string> ids;
};

std::vector<MeasureTree> romio_trees() {
  std::vector<MeasureTree> out;
  for (double v : romio_values()) out.push_back(romio_tree(v));
  return out;
}

std::string ingest_body(const MeasureTree& tree, const std::string& case_name, const std::string& started_at) {
  json doc = json::parse(report_text(tree, case_name));
  doc["meta"] = {{"commit", "abc"}, {"branch", "main"}, {"job_id", "1"}, {"started_at", started_at},
                 {"env", {{"OMP_NUM_THREADS", "2"}, {"TOKEN", "secret"}}}};
  return doc.dump();
}

}  // namespace

TEST_F(ApiTest, CasesSorted) {
  seed("zeta", {gpfs_tree(1)});
  seed("alpha", {gpfs_tree(1)}, 5);
  auto api = service();
  auto r = api.cases();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("cases"), json({"alpha", "zeta"}));
}

TEST_F(ApiTest, MissingStore) {
  ApiConfig config;
  config.store_dir = dir / "nope";
  EXPECT_THROW(ApiService{config}, Error);
}

TEST_F(ApiTest, CaseRuns) {
  seed("gpfs", {gpfs_tree(1), gpfs_tree(2), gpfs_tree(3)});
  auto api = service();
  auto r = api.case_runs("gpfs", {{"limit", "2"}});
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body.at("runs").size(), 2u);
  EXPECT_EQ(r.body.at("runs").at(1).at("run_id"), ids[2]);
  EXPECT_EQ(api.case_runs("nope", {}).status, 404);
  EXPECT_EQ(api.case_runs("gpfs", {{"limit", "x"}}).status, 400);
}

TEST_F(ApiTest, RunLabelsAndSunburst) {
  seed("gpfs", {gpfs_tree(6)});
  auto api = service();
  auto run = api.run(ids[0]);
  ASSERT_EQ(run.status, 200);
  EXPECT_EQ(run.body.at("run_id"), ids[0]);
  EXPECT_EQ(run.body.at("measures").at("name"), "execution");

  auto labels = api.labels(ids[0], {});
  ASSERT_EQ(labels.status, 200);
  EXPECT_DOUBLE_EQ(labels.body.at("entries").at("io").get<double>(), 50.0);
  EXPECT_DOUBLE_EQ(labels.body.at("total").get<double>(), 125.0);

  auto sub = api.labels(ids[0], {{"path", "execution/io"}});
  EXPECT_DOUBLE_EQ(sub.body.at("total").get<double>(), 50.0);

  auto sb = api.sunburst(ids[0], {});
  ASSERT_EQ(sb.status, 200);
  EXPECT_DOUBLE_EQ(sb.body.at("root").at("children").at(2).at("fraction").get<double>(), 0.4);

  EXPECT_EQ(api.run("ffff").status, 404);
  EXPECT_EQ(api.run("ffff").body.at("code"), "not_found");
  EXPECT_EQ(api.labels(ids[0], {{"path", "execution/none"}}).status, 404);
  EXPECT_EQ(api.labels(ids[0], {{"unit", "MiB"}}).status, 400);
  EXPECT_EQ(api.sunburst(ids[0], {{"path", "a//b"}}).status, 404);
}

TEST_F(ApiTest, SeriesOnRomioHasOneChangePointAndMatchesAnalysis) {
  seed("romio", romio_trees());
  auto api = service();
  auto r = api.series({{"case", "romio"}, {"path", "execution"}});
  ASSERT_EQ(r.status, 200);
  const auto& points = r.body.at("points");
  ASSERT_EQ(points.size(), 30u);
  ASSERT_EQ(r.body.at("change_points").size(), 1u);
  EXPECT_EQ(r.body.at("change_points").at(0).at("index"), kRomioFirstFixedRun - 1);

  // Annotation oracle: the same analysis called directly.
  auto values = romio_values();
  auto assessments = assess_series(values, api.config().analysis.gate.classify);
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(points.at(i).at("value").get<double>(), values[i]);
    EXPECT_EQ(points.at(i).at("class"), to_json(assessments[i].cls)) << i;
  }
  auto cps = detect_shifts(values, api.config().analysis.shifts);
  EXPECT_EQ(r.body.at("change_points").at(0), to_json(cps.at(0)));
  EXPECT_EQ(r.body.at("params"), to_json(api.config().analysis));
}

TEST_F(ApiTest, SeriesErrorsAndEmptyCase) {
  seed("gpfs", {gpfs_tree(1)});
  auto api = service();
  EXPECT_EQ(api.series({{"path", "execution"}}).status, 400);
  EXPECT_EQ(api.series({{"case", "gpfs"}}).status, 400);
  EXPECT_EQ(api.series({{"case", "gpfs"}, {"path", "/x"}}).status, 400);
  auto empty = api.series({{"case", "none"}, {"path", "execution"}});
  EXPECT_EQ(empty.status, 200);
  EXPECT_TRUE(empty.body.at("points").empty());
  auto main_only = api.series({{"case", "gpfs"}, {"path", "execution"}, {"branch", "dev"}});
  EXPECT_TRUE(main_only.body.at("points").empty());
}

TEST_F(ApiTest, CompareIdenticalRuns) {
  seed("gpfs", {gpfs_tree(1), gpfs_tree(1)});
  auto api = service();
  auto r = api.compare({{"a", ids[0]}, {"b", ids[1]}});
  ASSERT_EQ(r.status, 200);
  for (const auto& row : r.body.at("rows")) {
    EXPECT_EQ(row.at("delta").get<double>(), 0.0);
    EXPECT_EQ(row.at("status"), "present");
  }
  EXPECT_EQ(r.body.at("commits").at("a"), "c0");
  EXPECT_EQ(api.compare({{"a", ids[0]}, {"b", "ffff"}}).status, 404);
  EXPECT_EQ(api.compare({{"a", ids[0]}}).status, 400);
}

TEST_F(ApiTest, CompareCoughTopRowIsVelocityCorrection) {
  seed("cough", {cough_tree(false), cough_tree(true)});
  auto api = service();
  auto r = api.compare({{"a", ids[0]}, {"b", ids[1]}});
  const auto& top = r.body.at("rows").at(0);
  EXPECT_EQ(top.at("path"), kVelocityCorrectionPath);
  EXPECT_NEAR(top.at("delta").get<double>(), -30.0, 1e-9);
  EXPECT_NEAR(top.at("relative_delta").get<double>(), -0.75, 1e-12);
}

TEST(Compare, AbsentPathsAreMarked) {
  auto a = make_record(MeasureTree{MeasureNode::leaf("root", 10, "s").with(MeasureNode::leaf("x", 4, "s"))}, "c", 1);
  auto b = make_record(MeasureTree{MeasureNode::leaf("root", 10, "s").with(MeasureNode::leaf("y", 4, "s"))}, "c", 2);
  auto c = compare_runs(a, b);
  ASSERT_EQ(c.rows.size(), 3u);
  EXPECT_EQ(c.rows[0].path, "root");
  EXPECT_EQ(c.rows[1].path, "root/x");
  EXPECT_EQ(c.rows[1].status, "absent_in_b");
  EXPECT_FALSE(c.rows[1].value_b);
  EXPECT_FALSE(c.rows[1].delta);
  EXPECT_EQ(c.rows[2].status, "absent_in_a");
  auto j = to_json(c);
  EXPECT_EQ(j.at("rows").at(1).at("absent"), true);
  EXPECT_TRUE(j.at("rows").at(1).at("value_b").is_null());
}

TEST(Compare, UnitMismatchAndZeroBase) {
  auto a = make_record(MeasureTree{MeasureNode::leaf("root", 10, "s").with(MeasureNode::leaf("m", 0, "s"))}, "c", 1);
  auto b = make_record(MeasureTree{MeasureNode::leaf("root", 10, "s").with(MeasureNode::leaf("m", 3, "MiB"))}, "c", 2);
  auto c = compare_runs(a, b);
  ASSERT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(c.rows[1].status, "unit_mismatch");
  auto d = compare_runs(a, make_record(MeasureTree{MeasureNode::leaf("root", 10, "s").with(MeasureNode::leaf("m", 2, "s"))}, "c", 3));
  EXPECT_EQ(d.rows[0].path, "root/m");
  EXPECT_TRUE(std::isinf(*d.rows[0].relative_delta));
  EXPECT_TRUE(to_json(d).at("rows").at(0).at("relative_delta").is_null());
}

TEST_F(ApiTest, DiffWithStubCommand) {
  seed("gpfs", {gpfs_tree(1)});
  auto api = service("echo diff {from} {to}");
  auto r = api.diff({{"from", "A"}, {"to", "B"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_NE(r.body.at("diff").get<std::string>().find("A"), std::string::npos);
  EXPECT_NE(r.body.at("diff").get<std::string>().find("B"), std::string::npos);
  EXPECT_EQ(api.diff({{"from", "--output=x"}, {"to", "B"}}).status, 400);
  EXPECT_EQ(api.diff({{"from", "a;rm"}, {"to", "B"}}).status, 400);
  EXPECT_EQ(api.diff({{"from", "A"}}).status, 400);

  auto failing = service("sh -c 'echo bad revision >&2; exit 128' {from} {to}");
  auto f = failing.diff({{"from", "A"}, {"to", "B"}});
  EXPECT_EQ(f.status, 502);
  EXPECT_EQ(f.body.at("code"), "vcs_error");
  EXPECT_EQ(service().diff({{"from", "A"}, {"to", "B"}}).status, 501);
}

TEST_F(ApiTest, IngestIsIdempotent) {
  auto api = service();
  std::string body = ingest_body(gpfs_tree(1), "gpfs", "2021-06-01T00:00:00Z");
  auto first = api.ingest(body);
  ASSERT_EQ(first.status, 201) << first.body.dump();
  EXPECT_EQ(first.body.at("created"), true);
  auto second = api.ingest(body);
  EXPECT_EQ(second.status, 200);
  EXPECT_EQ(second.body.at("created"), false);
  EXPECT_EQ(second.body.at("run_id"), first.body.at("run_id"));
  EXPECT_EQ(api.cases().body.at("cases"), json({"gpfs"}));

  auto stored = api.run(first.body.at("run_id").get<std::string>());
  EXPECT_EQ(stored.body.at("meta").at("env"), json({{"OMP_NUM_THREADS", "2"}}));

  auto conflict = api.ingest(ingest_body(gpfs_tree(6), "gpfs", "2021-06-01T00:00:00Z"));
  EXPECT_EQ(conflict.status, 409);
}

TEST_F(ApiTest, IngestErrors) {
  auto api = service();
  EXPECT_EQ(api.ingest("{").status, 400);
  EXPECT_EQ(api.ingest(report_text(gpfs_tree(1), "gpfs")).status, 400);
  json no_start = json::parse(report_text(gpfs_tree(1), "gpfs"));
  no_start["meta"] = {{"commit", "x"}};
  EXPECT_EQ(api.ingest(no_start.dump()).status, 400);
  auto invalid = api.ingest(R"({"schema_version":1,"case":"c","meta":{"started_at":"2021-06-01T00:00:00Z"},
      "measures":{"name":"r","value":1,"unit":"s","children":[{"name":"a","value":2,"unit":"s"}]}})");
  EXPECT_EQ(invalid.status, 400);
  EXPECT_EQ(invalid.body.at("violations").at(0).at("path"), "r");

  auto holder = Store::open(dir.path(), Store::Mode::kWrite);
  EXPECT_EQ(api.ingest(ingest_body(gpfs_tree(1), "gpfs", "2021-06-01T00:00:00Z")).status, 503);
}

TEST_F(ApiTest, HttpRoundTrip) {
  seed("gpfs", {gpfs_tree(1), gpfs_tree(6)});
  write_file(dir / "www/index.html", "<html>dashboard</html>");
  ApiConfig config;
  config.store_dir = dir.path();
  config.static_dir = dir / "www";
  config.diff_command = "echo {from}..{to}";
  ApiService api(config);
  httplib::Server server;
  api.mount(server);
  int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto cases = client.Get("/api/v1/cases");
  ASSERT_TRUE(cases);
  EXPECT_EQ(cases->status, 200);
  EXPECT_EQ(cases->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(json::parse(cases->body).at("cases"), json({"gpfs"}));

  auto labels = client.Get("/api/v1/runs/" + ids[1] + "/labels");
  ASSERT_TRUE(labels);
  EXPECT_DOUBLE_EQ(json::parse(labels->body).at("entries").at("io").get<double>(), 50.0);

  auto series = client.Get("/api/v1/series?case=gpfs&path=execution%2Fio");
  ASSERT_TRUE(series);
  EXPECT_EQ(json::parse(series->body).at("points").size(), 2u);

  auto diff = client.Get("/api/v1/diff?from=A&to=B");
  ASSERT_TRUE(diff);
  EXPECT_NE(json::parse(diff->body).at("diff").get<std::string>().find("A..B"), std::string::npos);

  auto missing = client.Get("/api/v1/runs/ffff");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body).at("code"), "not_found");

  auto no_route = client.Get("/api/v1/nothing");
  ASSERT_TRUE(no_route);
  EXPECT_EQ(no_route->status, 404);
  EXPECT_EQ(json::parse(no_route->body).at("code"), "not_found");

  auto index = client.Get("/index.html");
  ASSERT_TRUE(index);
  EXPECT_EQ(index->status, 200);
  EXPECT_EQ(index->body, "<html>dashboard</html>");

  auto posted = client.Post("/api/v1/runs", ingest_body(gpfs_tree(2), "gpfs", "2021-07-01T00:00:00Z"),
                            "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 201);
  auto after = client.Get("/api/v1/cases/gpfs/runs");
  ASSERT_TRUE(after);
  EXPECT_EQ(json::parse(after->body).at("runs").size(), 3u);

  server.stop();
  worker.join();
}
