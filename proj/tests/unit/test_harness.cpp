#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "rqa/harness.hpp"
#include "rqa/io.hpp"
#include "rqa/synthetic.hpp"
#include "temp_dir.hpp"

using namespace rqa;
namespace fs = std::filesystem;

namespace {

FixtureSpec small_spec() {
  FixtureSpec spec;
  spec.units = {1, 2};
  spec.articles_per_unit = 40;
  spec.sample_per_unit = 40;
  spec.iterations = 2;
  return spec;
}

void edit_config(const fs::path& path, const std::function<void(nlohmann::json&)>& f) {
  auto j = nlohmann::json::parse(read_text_file(path));
  f(j);
  write_file_atomic(path, j.dump(2));
}

}  // namespace

TEST_CASE("config loading resolves paths and validates") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  const auto cfg = load_config(files.config);
  CHECK(cfg.articles.is_absolute());
  CHECK(fs::exists(cfg.articles));
  CHECK(cfg.models.size() == 2);
  CHECK(cfg.iterations == 2);
  CHECK(cfg.units == std::vector<int>{1, 2});
  CHECK_NOTHROW(cfg.validate());

  edit_config(files.config, [](auto& j) { j["iterations"] = 0; });
  CHECK_THROWS_AS(load_config(files.config).validate(), ConfigError);
  edit_config(files.config, [](auto& j) {
    j["iterations"] = 2;
    j.erase("seed");
  });
  CHECK_THROWS_AS(load_config(files.config), ConfigError);
  edit_config(files.config, [](auto& j) {
    j["seed"] = 3;
    j["articles"] = "missing.jsonl";
  });
  CHECK_THROWS_WITH_AS(load_config(files.config).validate(), doctest::Contains("missing.jsonl"), ConfigError);
}

TEST_CASE("stage names round trip") {
  for (Stage s : all_stages()) CHECK(stage_from_string(to_string(s)) == s);
  CHECK_THROWS(stage_from_string("nope"));
}

TEST_CASE("tasks cover article x model x strategy x iteration") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  const auto cfg = load_config(files.config);
  ArticleSet set = load_articles(cfg.articles, cfg.units);
  set = filter_eligible(set);
  const auto tasks = build_tasks(cfg, set);
  CHECK(tasks.size() == set.size() * 2 * 2 * 2);
  for (const auto& t : tasks) {
    CHECK(t.key.iteration >= 1);
    std::size_t systems = 0, users = 0;
    for (const auto& m : t.messages) (m.role == Role::system ? systems : users)++;
    CHECK(systems <= 1);
    CHECK(users == 1);
  }
}

TEST_CASE("mock pipeline runs end to end and reruns identically") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  auto cfg = load_config(files.config);
  cfg.mock.enabled = true;
  auto report = run(cfg, all_stages());
  REQUIRE_MESSAGE(report.ok, report.error);
  for (const char* f : {"articles.jsonl", "records.jsonl", "parsed.jsonl", "matrix.csv", "correlations.csv",
                        "fusion_individual.csv", "fusion_departmental_proxy.csv", "wata_mock-a.csv",
                        "kwic_mock-a.txt", "violin_individual_mean_fusion.svg", "manifest.json"})
    CHECK_MESSAGE(fs::exists(cfg.output_dir / f), f);

  const std::string fusion = read_text_file(cfg.output_dir / "fusion_individual.csv");
  CHECK(fusion.find("uoa,mean,median,best_single,rank_average,cv_mean,n\n") != std::string::npos);
  CHECK(fusion.find("\nAll,") != std::string::npos);

  const std::string records = read_text_file(cfg.output_dir / "records.jsonl");
  const std::string manifest = read_text_file(cfg.output_dir / "manifest.json");
  report = run(cfg, {Stage::score, Stage::extract});
  REQUIRE(report.ok);
  CHECK(read_text_file(cfg.output_dir / "records.jsonl") == records);
  CHECK(read_text_file(cfg.output_dir / "manifest.json") == manifest);
}

TEST_CASE("a failing stage keeps earlier outputs and records the failure point") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  auto cfg = load_config(files.config);
  cfg.mock.enabled = true;
  REQUIRE(run(cfg, {Stage::ingest}).ok);
  fs::remove(cfg.output_dir / "articles.jsonl");
  write_file_atomic(cfg.output_dir / "articles.jsonl", "{broken\n");
  const auto report = run(cfg, {Stage::prompt, Stage::score});
  CHECK_FALSE(report.ok);
  REQUIRE(report.failed_stage);
  CHECK(*report.failed_stage == Stage::prompt);
  const auto manifest = nlohmann::json::parse(read_text_file(cfg.output_dir / "manifest.json"));
  CHECK(manifest["failure"]["stage"] == "prompt");
  CHECK(manifest["stages"]["ingest"]["status"] == "ok");
  CHECK(fs::exists(cfg.output_dir / "gold_individual.csv"));
}

TEST_CASE("stages refuse to run without their inputs") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  auto cfg = load_config(files.config);
  cfg.mock.enabled = true;
  const auto report = run(cfg, {Stage::analyze});
  CHECK_FALSE(report.ok);
  INFO(report.error);
  CHECK(report.error.find("run the 'extract' stage first") != std::string::npos);
}

TEST_CASE("empty article file fails fast at ingest") {
  TempDir dir;
  const auto files = write_fixture(dir.path(), small_spec());
  auto cfg = load_config(files.config);
  write_file_atomic(cfg.articles, "");
  const auto report = run(cfg, {Stage::ingest});
  CHECK_FALSE(report.ok);
  CHECK(report.error.find("no articles") != std::string::npos);
}

TEST_CASE("fusion summary brackets the row maximum") {
  FusionRow r;
  r.label = "1";
  r.n = 10;
  r.mean = 0.4;
  r.median = 0.3;
  r.best_single = 0.35;
  r.rank_average = 0.45;
  r.cv_mean = 0.41;
  const auto text = fusion_summary({r}, GoldKind::individual);
  CHECK(text.find("[0.450]") != std::string::npos);
  CHECK(fusion_csv({r}).find("1,0.400000,0.300000,0.350000,0.450000,0.410000,10") != std::string::npos);
}
