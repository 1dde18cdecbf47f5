#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rqa/rng.hpp"
#include "rqa/stats.hpp"

using namespace rqa;

namespace {

// Independent oracle: rank by sorting index pairs, average each tie group.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<std::pair<double, std::size_t>> s;
  for (std::size_t i = 0; i < v.size(); ++i) s.emplace_back(v[i], i);
  std::sort(s.begin(), s.end());
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].first == s[i].first) ++j;
    double sum = 0;
    for (std::size_t k = i; k < j; ++k) sum += static_cast<double>(k + 1);
    for (std::size_t k = i; k < j; ++k) r[s[k].second] = sum / static_cast<double>(j - i);
    i = j;
  }
  return r;
}

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    dx += (x[i] - mx) * (x[i] - mx);
    dy += (y[i] - my) * (y[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

double oracle_binomial(int k, int n) {
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask)
    if (std::popcount(mask) >= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(std::uint64_t{1} << n);
}

ParsedRecord rec(const std::string& id, const std::string& model, Strategy s, int it, std::optional<double> eff,
                 bool multi = false, bool ok = true) {
  ParsedRecord r;
  r.key = {id, model, s, it};
  r.status = ok ? RecordStatus::ok : RecordStatus::failed;
  r.effective = eff;
  if (multi) r.parsed.flags.set(ScoreFlag::multi_article);
  return r;
}

}  // namespace

TEST_CASE("midranks") {
  const std::vector<double> v = {10, 20, 20, 5, 20};
  CHECK(midranks(v) == std::vector<double>{2, 4, 4, 1, 4});
}

TEST_CASE("spearman on the tied example matches the oracle") {
  const std::vector<double> x = {1, 2, 2, 4}, y = {1, 3, 2, 4};
  const double expected = oracle_pearson(oracle_ranks(x), oracle_ranks(y));
  CHECK(std::abs(spearman(x, y) - expected) <= 1e-12);
}

TEST_CASE("spearman matches the oracle on random tied vectors") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 48);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(uniform_index(rng, 6)) / 2.0;
      y[i] = static_cast<double>(uniform_index(rng, 9));
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) x[0] += 1;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] += 1;
    CHECK(std::abs(spearman(x, y) - oracle_pearson(oracle_ranks(x), oracle_ranks(y))) <= 1e-12);
  }
}

TEST_CASE("spearman properties") {
  const std::vector<double> x = {1, 2, 3, 4, 5}, y = {2, 1, 4, 3, 5};
  CHECK(spearman(x, y) == doctest::Approx(spearman(y, x)).epsilon(1e-15));
  std::vector<double> cubed;
  for (double v : x) cubed.push_back(v * v * v + 7);
  CHECK(spearman(cubed, y) == doctest::Approx(spearman(x, y)).epsilon(1e-15));
  std::vector<double> rev(x.rbegin(), x.rend());
  CHECK(spearman(x, rev) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), StatsError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), StatsError);
}

TEST_CASE("exact binomial tails match enumeration") {
  CHECK(binomial_tail(6, 6) == oracle_binomial(6, 6));
  CHECK(binomial_tail(6, 6) == 0.015625);
  CHECK(binomial_tail(9, 10) == oracle_binomial(9, 10));
  CHECK(binomial_tail(9, 10) == doctest::Approx(11.0 / 1024.0).epsilon(1e-15));
  for (int n = 1; n <= 16; ++n)
    for (int k = 0; k <= n; ++k) CHECK(binomial_tail(k, n) == doctest::Approx(oracle_binomial(k, n)).epsilon(1e-15));
  CHECK(binomial_tail(0, 200) == 1.0);
  CHECK(binomial_tail(200, 200) > 0.0);
}

TEST_CASE("sign test drops ties") {
  const std::vector<double> a = {0.5, 0.6, 0.7, 0.4}, b = {0.4, 0.5, 0.7, 0.3};
  const auto r = sign_test(a, b);
  CHECK(r.k == 3);
  CHECK(r.n == 3);
  CHECK(r.p_value == 0.125);
  CHECK(r.k <= r.n);
}

TEST_CASE("bootstrap on perfect monotone pairs is degenerate at 1") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i);
    y.push_back(std::exp(0.1 * i));
  }
  const auto r = correlate(x, y, 1000, 0.05, 5);
  CHECK(r.rho == 1.0);
  CHECK(r.ci_low == 1.0);
  CHECK(r.ci_high == 1.0);
  CHECK(r.n == 40);
}

TEST_CASE("bootstrap is reproducible and brackets rho") {
  Rng rng(8);
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    const double z = standard_normal(rng);
    x.push_back(z);
    y.push_back(z + standard_normal(rng));
  }
  const auto a = correlate(x, y, 500, 0.05, 77);
  const auto b = correlate(x, y, 500, 0.05, 77);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
  CHECK(a.ci_low <= a.rho);
  CHECK(a.rho <= a.ci_high);
  CHECK(a.replicates == 500);
  CHECK_THROWS_AS(bootstrap_ci(x, y, 50, 0.05, 1), StatsError);
}

TEST_CASE("unit aggregate uses the t quantile and clips") {
  const std::vector<double> rhos = {0.3, 0.5};
  const auto agg = aggregate_across_units(rhos);
  CHECK(agg.mean == doctest::Approx(0.4));
  // Half-width 12.706205 * 0.141421 / sqrt(2) = 1.2706205; only the top is clipped.
  CHECK(agg.ci_low == doctest::Approx(0.4 - 1.2706204736).epsilon(1e-9));
  CHECK(agg.ci_high == 1.0);
  const std::vector<double> six = {0.40, 0.42, 0.44, 0.46, 0.48, 0.50};
  const auto g = aggregate_across_units(six);
  // sd of the six values is 0.0374166; t(0.975, 5) = 2.570582.
  const double half = 2.5705818366147395 * 0.037416573867739 / std::sqrt(6.0);
  CHECK(g.ci_low == doctest::Approx(0.45 - half).epsilon(1e-9));
  CHECK(g.ci_high == doctest::Approx(0.45 + half).epsilon(1e-9));
}

TEST_CASE("linear quantiles") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.25) == 1.75);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.75) == 3.25);
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
}

TEST_CASE("iteration averaging excludes multi-article and failed records") {
  std::vector<ParsedRecord> rs = {
      rec("a", "m", Strategy::zero, 1, 3.0), rec("a", "m", Strategy::zero, 2, 2.0),
      rec("a", "m", Strategy::zero, 3, std::nullopt, true), rec("a", "m", Strategy::zero, 4, 4.0),
      rec("a", "m", Strategy::zero, 5, std::nullopt, true), rec("b", "m", Strategy::zero, 1, 2.0, false, false),
      rec("c", "m", Strategy::zero, 1, std::nullopt)};
  const auto col = mean_over_iterations(rs);
  REQUIRE(col.contains("a"));
  CHECK(col.at("a").mean == 3.0);
  CHECK(col.at("a").effective_k == 3);
  CHECK_FALSE(col.contains("b"));
  CHECK_FALSE(col.contains("c"));
}

TEST_CASE("score matrix from records") {
  std::vector<ParsedRecord> rs = {rec("b", "m2", Strategy::few, 1, 2.0), rec("a", "m1", Strategy::zero, 1, 3.0),
                                  rec("a", "m2", Strategy::few, 1, 4.0), rec("a", "m1", Strategy::zero, 2, 2.0)};
  const auto m = ScoreMatrix::from_records(rs);
  CHECK(m.rows == std::vector<std::string>{"a", "b"});
  REQUIRE(m.columns.size() == 2);
  const auto c1 = m.column_index({"m1", Strategy::zero});
  CHECK(m.cells[0][c1]->mean == 2.5);
  CHECK_FALSE(m.cells[1][c1]);
  const auto sub = m.select_rows({"b"});
  CHECK(sub.rows == std::vector<std::string>{"b"});
  CHECK(sub.cells[0][m.column_index({"m2", Strategy::few})]->mean == 2.0);
}

TEST_CASE("parsed record jsonl round trip") {
  ParsedRecord r = rec("x,1", "m", Strategy::few, 2, 2.5);
  r.parsed.originality = 2.0;
  r.parsed.rigour = 3.0;
  r.parsed.flags.set(ScoreFlag::subscore_fallback);
  const ParsedRecord back = parsed_from_jsonl(parsed_to_jsonl(r));
  CHECK(back.key == r.key);
  CHECK(back.parsed == r.parsed);
  CHECK(back.effective == r.effective);
  CHECK(back.status == r.status);
}
