#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rqa/rng.hpp"
#include "rqa/wata.hpp"

using namespace rqa;

namespace {

double oracle_chi2(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double rows[2] = {a + b, c + d}, cols[2] = {a + c, b + d};
  const double obs[2][2] = {{a, b}, {c, d}};
  double chi = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      chi += (obs[i][j] - e) * (obs[i][j] - e) / e;
    }
  return chi;
}

std::vector<TokenizedDoc> corpus(const std::string& prefix, std::size_t n, const std::string& term, std::size_t with) {
  std::vector<TokenizedDoc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = "common words everywhere";
    if (i < with) text += " " + term;
    docs.push_back(tokenize(text, prefix + std::to_string(i)));
  }
  return docs;
}

}  // namespace

TEST_CASE("tokenizer rules") {
  CHECK(tokenize("Score: 3* (score!)").terms == std::set<std::string>{"score"});
  CHECK(tokenize("Let's think").terms == std::set<std::string>{"let", "think"});
  CHECK(tokenize("Rigour, RIGOUR rigour-based").terms == std::set<std::string>{"rigour", "based"});
  CHECK(tokenize("naïve café").terms == std::set<std::string>{"naïve", "café"});
  CHECK(tokenize("").terms.empty());
}

TEST_CASE("chi-square matches the contingency oracle") {
  CHECK(chi_square_2x2(180, 20, 20, 180) == doctest::Approx(oracle_chi2(180, 20, 20, 180)).epsilon(1e-12));
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto a = 1 + uniform_index(rng, 300), b = 1 + uniform_index(rng, 300);
    const auto c = 1 + uniform_index(rng, 300), d = 1 + uniform_index(rng, 300);
    CHECK(chi_square_2x2(a, b, c, d) ==
          doctest::Approx(oracle_chi2(double(a), double(b), double(c), double(d))).epsilon(1e-10));
  }
  CHECK(chi_square_2x2(0, 0, 5, 5) == 0.0);
  CHECK(chi_square_sf1(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_sf1(0.0) == 1.0);
}

TEST_CASE("benjamini-hochberg adjustment") {
  const std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
  const auto q = benjamini_hochberg(p);
  // Sorted p: 0.005, 0.01, 0.03, 0.04 -> 0.02, 0.02, 0.04, 0.04.
  CHECK(q[3] == doctest::Approx(0.02));
  CHECK(q[0] == doctest::Approx(0.02));
  CHECK(q[2] == doctest::Approx(0.04));
  CHECK(q[1] == doctest::Approx(0.04));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] >= p[i]);
}

TEST_CASE("planted term 180/200 vs 20/200") {
  const auto a = corpus("a", 200, "planted", 180);
  const auto b = corpus("b", 200, "planted", 20);
  const auto stats = compare(a, b);
  REQUIRE(stats.size() == 1);
  const auto& s = stats[0];
  CHECK(s.term == "planted");
  CHECK(s.df_a == 180);
  CHECK(s.df_b == 20);
  CHECK(s.chi2 == doctest::Approx(oracle_chi2(180, 20, 20, 180)).epsilon(1e-12));
  CHECK(s.direction == Direction::a);
  CHECK(s.q <= 0.05);
  CHECK(s.rate_a() == 0.9);
}

TEST_CASE("swapping corpora mirrors every statistic") {
  Rng rng(77);
  std::vector<TokenizedDoc> a, b;
  const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
  for (int i = 0; i < 150; ++i) {
    std::string ta, tb;
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      if (uniform01(rng) < 0.2 + 0.08 * double(w)) ta += vocab[w] + " ";
      if (uniform01(rng) < 0.6 - 0.05 * double(w)) tb += vocab[w] + " ";
    }
    a.push_back(tokenize(ta));
    b.push_back(tokenize(tb));
  }
  const auto ab = compare_all(a, b);
  const auto ba = compare_all(b, a);
  REQUIRE(ab.size() == ba.size());
  for (std::size_t i = 0; i < ab.size(); ++i) {
    CHECK(ab[i].term == ba[i].term);
    CHECK(ab[i].chi2 == ba[i].chi2);
    CHECK(ab[i].p == ba[i].p);
    CHECK(ab[i].q == ba[i].q);
    CHECK(ab[i].df_a == ba[i].df_b);
    if (ab[i].rate_a() != ab[i].rate_b()) CHECK(ab[i].direction != ba[i].direction);
    CHECK(ab[i].q >= ab[i].p);
    CHECK(ab[i].df_a <= ab[i].n_a);
  }
}

TEST_CASE("minimum document frequency filter") {
  const auto a = corpus("a", 50, "rare", 2);
  const auto b = corpus("b", 50, "rare", 0);
  const auto all = compare_all(a, b, 5);
  CHECK(std::none_of(all.begin(), all.end(), [](const TermStat& s) { return s.term == "rare"; }));
}

TEST_CASE("kwic samples whole tokens in corpus order") {
  std::vector<RawDoc> docs;
  for (int i = 0; i < 30; ++i)
    docs.push_back({"d" + std::to_string(i), "The wonder of it. Wonderful but not the term. I wonder\nwhy."});
  const auto lines = kwic("wonder", docs, 10, 12, 4);
  CHECK(lines.size() == 10);
  CHECK(lines == kwic("wonder", docs, 10, 12, 4));
  for (const auto& l : lines) {
    std::string t = l.term;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    CHECK(t == "wonder");
    CHECK(l.left.size() <= 12);
    CHECK(l.right.size() <= 12);
    CHECK(l.right.find('\n') == std::string::npos);
    CHECK((l.right.empty() || !std::isalnum(static_cast<unsigned char>(l.right[0]))));
  }
  std::vector<int> order;
  for (const auto& l : lines) order.push_back(std::stoi(l.doc_id.substr(1)));
  CHECK(std::is_sorted(order.begin(), order.end()));
  CHECK(kwic("absent", docs, 5, 10, 1).empty());
}

TEST_CASE("term csv reports containment percentages") {
  const auto stats = compare(corpus("a", 200, "planted", 180), corpus("b", 200, "planted", 20));
  const auto csv = term_stats_csv(stats, "zero", "few");
  CHECK(csv.find("term,df_zero,n_zero,pct_zero,df_few,n_few,pct_few,chi2,p,q,direction") != std::string::npos);
  CHECK(csv.find("planted,180,200,90.0,20,200,10.0,") != std::string::npos);
}
