#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "rqa/rng.hpp"
#include "rqa/stats.hpp"
#include "rqa/violin.hpp"

using namespace rqa;

namespace {

// Order-statistic oracle for type-7 quantiles.
double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

double trapezoid(const std::vector<std::pair<double, double>>& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += 0.5 * (curve[i].second + curve[i - 1].second) * (curve[i].first - curve[i - 1].first);
  return area;
}

}  // namespace

TEST_CASE("non-integer gold scores are discarded") {
  GoldStandard g;
  g.scores = {{"a", 2.0}, {"b", 2.5}, {"c", 3.0}};
  const auto s = violin_summary({{"a", 2.2}, {"b", 3.1}, {"c", 3.4}}, g);
  CHECK(s.discarded_non_integer == 1);
  REQUIRE(s.groups.size() == 2);
  CHECK(s.groups[0].gold_level == 2);
  CHECK(s.groups[1].gold_level == 3);
  CHECK(s.groups[0].count == 1);

  GoldStandard none;
  none.scores = {{"a", 2.5}};
  CHECK_THROWS_AS(violin_summary({{"a", 2.0}}, none), ViolinError);
}

TEST_CASE("quartiles match the order-statistic oracle") {
  GoldStandard g;
  std::map<std::string, double> scores;
  const std::vector<double> v = {1, 2, 3, 4};
  for (std::size_t i = 0; i < v.size(); ++i) {
    g.scores["a" + std::to_string(i)] = 3.0;
    scores["a" + std::to_string(i)] = v[i];
  }
  const auto s = violin_summary(scores, g);
  REQUIRE(s.groups.size() == 1);
  CHECK(s.groups[0].q1 == 1.75);
  CHECK(s.groups[0].median == 2.5);
  CHECK(s.groups[0].q3 == 3.25);
  CHECK(s.groups[0].q1 == oracle_quantile(v, 0.25));

  Rng rng(5);
  std::vector<double> w;
  for (int i = 0; i < 37; ++i) w.push_back(1.0 + 3.0 * uniform01(rng));
  std::sort(w.begin(), w.end());
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) CHECK(quantile_sorted(w, q) == doctest::Approx(oracle_quantile(w, q)).epsilon(1e-14));
}

TEST_CASE("density is non-negative and integrates to one") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v;
    const auto n = 5 + uniform_index(rng, 100);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(std::clamp(2.5 + standard_normal(rng), 1.0, 4.0));
    std::sort(v.begin(), v.end());
    const double bw = silverman_bandwidth(v);
    CHECK(bw > 0.0);
    const auto curve = kernel_density(v, bw);
    CHECK(curve.size() == kDensityGridPoints);
    CHECK(curve.front().first == 1.0);
    CHECK(curve.back().first == 4.0);
    for (const auto& [x, d] : curve) CHECK(d >= 0.0);
    CHECK(std::abs(trapezoid(curve) - 1.0) <= 1e-3);
  }
}

TEST_CASE("silverman bandwidth formula") {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  // sd = 1.5811, IQR = 2 -> 2/1.34 = 1.4925 is smaller.
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2)).epsilon(1e-12));
}

TEST_CASE("svg output is well-formed xml") {
  GoldStandard g;
  std::map<std::string, double> scores;
  Rng rng(3);
  for (int i = 0; i < 80; ++i) {
    const std::string id = "a" + std::to_string(i);
    g.scores[id] = 1.0 + static_cast<double>(i % 4);
    scores[id] = std::clamp(g.scores[id] + 0.5 * standard_normal(rng), 1.0, 4.0);
  }
  g.scores["flat1"] = 4.0;
  g.scores["x"] = 2.5;
  scores["x"] = 2.0;
  const auto s = violin_summary(scores, g, "demo <&> label");
  const std::string svg = violin_svg(s);
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  REQUIRE_NOTHROW(boost::property_tree::read_xml(in, tree));
  CHECK(tree.get_child_optional("svg").has_value());
  CHECK(svg.find("Gold score") != std::string::npos);
  const std::string csv = violin_csv(s);
  CHECK(csv.find("gold_level") != std::string::npos);
}

TEST_CASE("a group without spread is drawn as a line") {
  GoldStandard g;
  g.scores = {{"a", 2.0}, {"b", 2.0}, {"c", 3.0}, {"d", 3.0}};
  const auto s = violin_summary({{"a", 2.5}, {"b", 2.5}, {"c", 3.0}, {"d", 3.5}}, g);
  CHECK(s.groups[0].density.empty());
  const std::string svg = violin_svg(s);
  CHECK(svg.find("degenerate") != std::string::npos);
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
}
