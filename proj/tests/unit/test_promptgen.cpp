#include <doctest.h>

#include <set>

#include "rqa/promptgen.hpp"
#include "rqa/synthetic.hpp"

using namespace rqa;

namespace {

Article make(const std::string& id, int uoa, std::string title, std::string abstract) {
  Article a;
  a.id = id;
  a.uoa = uoa;
  a.doi = "10.1/" + id;
  a.title = std::move(title);
  a.abstract = std::move(abstract);
  return a;
}

FewShotPool make_pool() {
  FewShotPool pool;
  for (int u = 1; u <= 2; ++u)
    for (int s = 1; s <= 4; ++s)
      for (int k = 0; k < 2; ++k) {
        const std::string id = "ex" + std::to_string(u) + std::to_string(s) + std::to_string(k);
        pool.units[u][static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(k)] =
            ExemplarArticle{make(id, u, "Exemplar " + id, "Abstract of " + id), s};
      }
  return pool;
}

std::size_t count(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

TEST_CASE("zero-shot prompt is the template and nothing else") {
  CHECK(build_zero_shot_user(make("a", 1, "T", "A")) == "Score this article:\nT\nAbstract\nA");
  const Article multi = make("m", 1, "First line\nsecond line", "Body");
  CHECK(build_zero_shot_user(multi) == "Score this article:\nFirst line\nsecond line\nAbstract\nBody");
  CHECK_THROWS_AS(build_zero_shot_user(make("e", 1, "", "A")), PromptError);
  CHECK_THROWS_AS(build_zero_shot_user(make("e", 1, "T", "")), PromptError);
}

TEST_CASE("scaffolding byte count equals the two literals") {
  const Article a = make("a", 1, "TT", "AAA");
  const std::string p = build_zero_shot_user(a);
  CHECK(p.size() - a.title.size() - a.abstract.size() == kScoreRequest.size() + kAbstractHeading.size());
  CHECK(kScoreRequest.size() + kAbstractHeading.size() == 30);
}

TEST_CASE("few-shot selection is seeded and drawn from the article's unit") {
  const auto pool = make_pool();
  const Article a = make("a", 2, "T", "A");
  const auto s1 = select_fewshot(a, pool, 99, 3);
  const auto s2 = select_fewshot(a, pool, 99, 3);
  CHECK(s1.picks == s2.picks);
  for (int s = 1; s <= 4; ++s) {
    const auto& ex = s1.exemplars[static_cast<std::size_t>(s - 1)];
    CHECK(ex.star == s);
    CHECK(ex.article.uoa == 2);
  }
  CHECK_THROWS_AS(select_fewshot(make("z", 5, "T", "A"), pool, 1, 1), PromptError);
}

TEST_CASE("over 200 regenerations every exemplar is drawn") {
  const auto pool = make_pool();
  const Article a = make("a", 1, "T", "A");
  std::set<std::string> seen;
  bool varied = false;
  const auto first = select_fewshot(a, pool, 5, 1).picks;
  for (std::uint64_t call = 1; call <= 200; ++call) {
    const auto sel = select_fewshot(a, pool, 5, call);
    if (sel.picks != first) varied = true;
    for (const auto& ex : sel.exemplars) seen.insert(ex.article.id);
  }
  CHECK(varied);
  CHECK(seen.size() == 8);
}

TEST_CASE("few-shot prompt layout") {
  const auto pool = make_pool();
  const Article a = make("a", 1, "Target title", "Target abstract");
  const auto sel = select_fewshot(a, pool, 11, 1);
  const std::string p = build_few_shot_user(a, sel);
  CHECK(count(p, "###\n") == 4);
  CHECK(count(p, "###") == 4);
  std::size_t last = 0;
  for (int s = 1; s <= 4; ++s) {
    const std::string header = "This article scores " + std::to_string(s) + "*:\n";
    const auto pos = p.find(header);
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
    const auto& ex = sel.exemplars[static_cast<std::size_t>(s - 1)].article;
    CHECK(p.find(header + ex.title + "\nAbstract\n" + ex.abstract + "\n###\n") == pos);
  }
  const std::string zero = build_zero_shot_user(a);
  REQUIRE(p.size() >= zero.size());
  CHECK(p.substr(p.size() - zero.size()) == zero);
}

TEST_CASE("system prompt validation and message composition") {
  CHECK_THROWS_AS(SystemPrompt(""), PromptError);
  CHECK_THROWS_AS(SystemPrompt("Hello"), PromptError);
  const SystemPrompt sys(default_system_prompt());
  CHECK(sys.text().starts_with(kSystemPromptOpening));

  const auto two = compose_messages(sys, "Score this article:\nT\nAbstract\nA", true);
  REQUIRE(two.size() == 2);
  CHECK(two[0].role == Role::system);
  CHECK(two[0].content == sys.text());
  CHECK(two[1].role == Role::user);

  const auto one = compose_messages(sys, "USER", false);
  REQUIRE(one.size() == 1);
  CHECK(one[0].role == Role::user);
  CHECK(one[0].content.starts_with(sys.text()));
  CHECK(one[0].content.ends_with("USER"));
  CHECK_THROWS_AS(compose_messages(sys, "", true), PromptError);
}
