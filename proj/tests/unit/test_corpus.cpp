#include <doctest.h>

#include <algorithm>
#include <set>

#include <json.hpp>

#include "rqa/corpus.hpp"
#include "rqa/io.hpp"
#include "temp_dir.hpp"

using namespace rqa;

namespace {

std::string record(const std::string& id, int uoa, const std::string& abstract, bool doi = true) {
  nlohmann::json j{{"id", id}, {"uoa", uoa}, {"title", "Title " + id}, {"abstract", abstract}};
  j["doi"] = doi ? nlohmann::json("10.1/" + id) : nlohmann::json(nullptr);
  return j.dump() + "\n";
}

Article article(const std::string& id, int uoa, std::size_t abstract_len, bool doi = true) {
  Article a;
  a.id = id;
  a.uoa = uoa;
  a.title = "T" + id;
  a.abstract = std::string(abstract_len, 'x');
  if (doi) a.doi = "10.1/" + id;
  return a;
}

std::string pool_line(const std::string& id, int uoa, int star) {
  nlohmann::json j{{"id", id}, {"uoa", uoa}, {"title", "Ex " + id}, {"abstract", "abs " + id},
                   {"doi", "10.2/" + id}, {"star", star}};
  return j.dump() + "\n";
}

std::string full_pool(const std::vector<int>& units, const std::string& skip = {}) {
  std::string text;
  for (int u : units)
    for (int s = 1; s <= 4; ++s)
      for (int k = 0; k < 2; ++k) {
        const std::string id = "ex-" + std::to_string(u) + "-" + std::to_string(s) + "-" + std::to_string(k);
        if (id != skip) text += pool_line(id, u, s);
      }
  return text;
}

}  // namespace

TEST_CASE("parse_articles reads records and skips blank lines") {
  const auto set = parse_articles(record("a", 1, "x") + "\n" + record("b", 2, "y"), "mem");
  REQUIRE(set.size() == 2);
  CHECK(set.articles[0].id == "a");
  CHECK(set.articles[1].uoa == 2);
  CHECK(set.find("b") != nullptr);
  CHECK(set.find("zz") == nullptr);
}

TEST_CASE("duplicate ids are reported with both line numbers") {
  const std::string text = record("a", 1, "x") + record("dup", 1, "y") + record("c", 1, "z") +
                           record("d", 1, "w") + record("dup", 2, "v");
  try {
    parse_articles(text, "fixture.jsonl");
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("dup") != std::string::npos);
    CHECK(msg.find("lines 2 and 5") != std::string::npos);
  }
}

TEST_CASE("malformed records name their line") {
  const std::string text = record("a", 1, "x") + "{not json\n";
  CHECK_THROWS_WITH_AS(parse_articles(text, "f.jsonl"), doctest::Contains("f.jsonl:2"), CorpusError);
  CHECK_THROWS_AS(parse_articles(R"({"id":"a","uoa":9,"title":"t","abstract":"x"})", "f"), CorpusError);
  CHECK_THROWS_AS(parse_articles(R"({"id":"a","uoa":1,"title":"","abstract":"x"})", "f"), CorpusError);
}

TEST_CASE("serialisation round-trips") {
  ArticleSet set;
  set.articles = {article("a", 1, 5), article("b", 3, 7, false)};
  set.articles[0].title = "Line one\nline two";
  const auto back = parse_articles(serialize_articles(set), "rt");
  CHECK(back.articles == set.articles);
}

TEST_CASE("decile screen on distinct lengths 1..100 keeps lengths 11..100") {
  ArticleSet set;
  for (std::size_t len = 1; len <= 100; ++len) set.articles.push_back(article("a" + std::to_string(len), 1, len));
  std::reverse(set.articles.begin(), set.articles.end());
  const auto out = filter_eligible(set);
  REQUIRE(out.size() == 90);
  // Oracle: sort by length and drop the bottom ten.
  std::vector<std::size_t> lengths;
  for (const auto& a : set.articles) lengths.push_back(a.abstract.size());
  std::sort(lengths.begin(), lengths.end());
  std::set<std::size_t> expected(lengths.begin() + 10, lengths.end());
  std::set<std::size_t> got;
  for (const auto& a : out.articles) got.insert(a.abstract.size());
  CHECK(got == expected);
  CHECK(*got.begin() == 11);
}

TEST_CASE("articles without a DOI are removed before the cut") {
  ArticleSet set;
  for (int i = 0; i < 10; ++i) set.articles.push_back(article("a" + std::to_string(i), 1, 50 + i, i >= 2));
  const auto out = filter_eligible(set);
  for (const auto& a : out.articles) CHECK(a.doi.has_value());
  // 8 with DOIs; cut = 8/10 = 0 so all 8 stay.
  CHECK(out.size() == 8);
}

TEST_CASE("decile screen ties are retained and the screen is idempotent") {
  ArticleSet set;
  for (int i = 0; i < 20; ++i) set.articles.push_back(article("a" + std::to_string(i), 1, i < 5 ? 10 : 40 + i));
  const auto once = filter_eligible(set);
  CHECK(once.size() == 20);  // the 10% rank falls inside the tie at length 10
  const auto twice = filter_eligible(once);
  CHECK(twice.articles == once.articles);

  ArticleSet distinct;
  for (int i = 0; i < 30; ++i) distinct.articles.push_back(article("d" + std::to_string(i), 2, 10 + i));
  const auto a = filter_eligible(distinct);
  CHECK(a.size() == 27);
  CHECK(filter_eligible(a).articles == a.articles);
}

TEST_CASE("sampling is per unit, seeded and order preserving") {
  ArticleSet set;
  for (int u = 1; u <= 3; ++u)
    for (int i = 0; i < 50; ++i) set.articles.push_back(article(std::to_string(u) + "-" + std::to_string(i), u, 20));
  const auto s1 = sample_per_uoa(set, 10, 42);
  const auto s2 = sample_per_uoa(set, 10, 42);
  const auto s3 = sample_per_uoa(set, 10, 43);
  CHECK(s1.articles == s2.articles);
  CHECK(s1.articles != s3.articles);
  std::map<int, int> per_unit;
  for (const auto& a : s1.articles) ++per_unit[a.uoa];
  for (int u = 1; u <= 3; ++u) CHECK(per_unit[u] == 10);
  // Input order is kept.
  std::vector<std::size_t> positions;
  for (const auto& a : s1.articles) {
    auto it = std::find_if(set.articles.begin(), set.articles.end(), [&](const Article& x) { return x.id == a.id; });
    positions.push_back(static_cast<std::size_t>(it - set.articles.begin()));
  }
  CHECK(std::is_sorted(positions.begin(), positions.end()));
  CHECK(sample_per_uoa(set, 500, 1).size() == 150);
}

TEST_CASE("departmental proxy gold averages submissions and warns on missing ones") {
  ArticleSet set;
  set.articles = {article("a", 1, 5), article("b", 1, 5), article("c", 1, 5)};
  std::vector<std::string> warnings;
  const auto gold = build_proxy_gold(set, {{"a", {3.0, 2.0}}, {"b", {3.5}}}, &warnings);
  CHECK(gold.scores.at("a") == doctest::Approx(2.5));
  CHECK(gold.scores.at("b") == 3.5);
  CHECK_FALSE(gold.scores.contains("c"));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("'c'") != std::string::npos);
  CHECK_THROWS_AS(build_proxy_gold(set, {{"zz", {3.0}}}), CorpusError);
  CHECK_THROWS_AS(build_proxy_gold(set, {{"a", {4.5}}}), CorpusError);
}

TEST_CASE("nine-point norm referencing") {
  ArticleSet set;
  set.articles = {article("a", 1, 5), article("b", 1, 5), article("c", 1, 5)};
  const auto g = norm_reference(set, {{"a", 1}, {"b", 5}, {"c", 9}}, {{1, 2.5}});
  CHECK(g.kind == GoldKind::individual);
  CHECK(g.scores.at("a") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.scores.at("b") == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(g.scores.at("c") == doctest::Approx(4.0).epsilon(1e-12));

  // Shifted unit mean with clamping.
  const auto h = norm_reference(set, {{"a", 1}, {"b", 5}, {"c", 9}}, {{1, 3.0}});
  CHECK(h.scores.at("a") == doctest::Approx(1.5));
  CHECK(h.scores.at("b") == doctest::Approx(3.0));
  CHECK(h.scores.at("c") == doctest::Approx(4.0));
}

TEST_CASE("gold csv loading") {
  TempDir dir;
  ArticleSet set;
  set.articles = {article("a", 1, 5), article("b", 1, 5)};
  write_file_atomic(dir / "g.csv", "article_id,score\na,3\nb,2.5\nzz,1\n");
  const auto g = load_gold(dir / "g.csv", GoldKind::individual, set);
  CHECK(g.scores.size() == 2);
  CHECK(g.scores.at("b") == 2.5);
  const auto round = dir / "r.csv";
  write_file_atomic(round, serialize_gold(g));
  CHECK(load_gold(round, GoldKind::individual, set).scores == g.scores);

  write_file_atomic(dir / "bad.csv", "article_id,score\na,5\n");
  CHECK_THROWS_AS(load_gold(dir / "bad.csv", GoldKind::individual, set), CorpusError);
  write_file_atomic(dir / "dup.csv", "article_id,score\na,3\na,2\n");
  CHECK_THROWS_AS(load_gold(dir / "dup.csv", GoldKind::individual, set), CorpusError);
  write_file_atomic(dir / "hdr.csv", "id,value\na,3\n");
  CHECK_THROWS_AS(load_gold_rows(dir / "hdr.csv"), CorpusError);
  CHECK(load_gold_rows(dir / "dup.csv").at("a").size() == 2);
}

TEST_CASE("a complete few-shot pool is accepted") {
  ArticleSet eval;
  eval.articles = {article("e1", 1, 5)};
  const auto units = default_units();
  const auto pool = parse_fewshot_pool(full_pool(units), "pool", eval);
  CHECK(pool.exemplar_count() == 48);
  for (int u : units)
    for (int s = 1; s <= 4; ++s)
      for (const auto& ex : pool.cell(u, s)) {
        CHECK(ex.star == s);
        CHECK(ex.article.uoa == u);
      }
}

TEST_CASE("an incomplete pool cell is named in the error") {
  ArticleSet eval;
  CHECK_THROWS_WITH_AS(parse_fewshot_pool(full_pool(default_units(), "ex-3-2-1"), "pool", eval),
                       doctest::Contains("(uoa 3, 2*)"), CorpusError);
}

TEST_CASE("exemplars must not overlap the evaluation set") {
  ArticleSet eval;
  eval.articles = {article("ex-1-1-0", 1, 5)};
  CHECK_THROWS_WITH_AS(parse_fewshot_pool(full_pool({1}), "pool", eval, {1}),
                       doctest::Contains("evaluation set"), CorpusError);
}
