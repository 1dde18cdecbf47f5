#include "rqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rqa/rng.hpp"

namespace rqa {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

bool has_two_distinct(std::span<const double> v) {
  for (double x : v)
    if (x != v.front()) return true;
  return false;
}

}  // namespace

std::string parsed_to_jsonl(const ParsedRecord& r) {
  json j;
  j["article_id"] = r.key.article_id;
  j["model"] = r.key.model;
  j["strategy"] = to_string(r.key.strategy);
  j["iteration"] = r.key.iteration;
  j["status"] = r.status == RecordStatus::ok ? "ok" : "failed";
  j["overall"] = optional_number(r.parsed.overall);
  j["originality"] = optional_number(r.parsed.originality);
  j["significance"] = optional_number(r.parsed.significance);
  j["rigour"] = optional_number(r.parsed.rigour);
  j["effective"] = optional_number(r.effective);
  j["flags"] = r.parsed.flags.names();
  return j.dump();
}

ParsedRecord parsed_from_jsonl(const std::string& line) {
  const json j = json::parse(line);
  ParsedRecord r;
  r.key.article_id = j.at("article_id").get<std::string>();
  r.key.model = j.at("model").get<std::string>();
  r.key.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.key.iteration = j.at("iteration").get<int>();
  r.status = j.at("status").get<std::string>() == "ok" ? RecordStatus::ok : RecordStatus::failed;
  r.parsed.overall = read_optional(j, "overall");
  r.parsed.originality = read_optional(j, "originality");
  r.parsed.significance = read_optional(j, "significance");
  r.parsed.rigour = read_optional(j, "rigour");
  r.effective = read_optional(j, "effective");
  r.parsed.flags = ScoreFlags::from_names(j.value("flags", std::vector<std::string>{}));
  return r;
}

std::string ColumnId::label() const { return model + "/" + std::string(to_string(strategy)); }

ScoreColumn mean_over_iterations(std::span<const ParsedRecord> records) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.status != RecordStatus::ok) continue;
    if (r.parsed.flags.has(ScoreFlag::multi_article)) continue;
    if (!r.effective) continue;
    auto& [sum, k] = acc[r.key.article_id];
    sum += *r.effective;
    ++k;
  }
  ScoreColumn out;
  for (const auto& [id, sk] : acc) out[id] = {sk.first / sk.second, sk.second};
  return out;
}

ScoreMatrix ScoreMatrix::from_records(std::span<const ParsedRecord> records) {
  std::map<ColumnId, std::vector<ParsedRecord>> grouped;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    grouped[{r.key.model, r.key.strategy}].push_back(r);
    ids.push_back(r.key.article_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  ScoreMatrix m;
  m.rows = std::move(ids);
  m.cells.assign(m.rows.size(), std::vector<std::optional<Cell>>(grouped.size()));
  std::size_t c = 0;
  for (const auto& [col, recs] : grouped) {
    m.columns.push_back(col);
    const ScoreColumn column = mean_over_iterations(recs);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      if (auto it = column.find(m.rows[r]); it != column.end()) m.cells[r][c] = it->second;
    }
    ++c;
  }
  return m;
}

ScoreMatrix ScoreMatrix::select_rows(const std::vector<std::string>& ids) const {
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < rows.size(); ++r) index[rows[r]] = r;
  ScoreMatrix out;
  out.columns = columns;
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) continue;
    out.rows.push_back(id);
    out.cells.push_back(cells[it->second]);
  }
  return out;
}

std::vector<std::optional<double>> ScoreMatrix::column_values(std::size_t c) const {
  std::vector<std::optional<double>> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (cells[r][c]) out[r] = cells[r][c]->mean;
  return out;
}

std::size_t ScoreMatrix::column_index(const ColumnId& id) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == id) return c;
  throw std::out_of_range(fmt::format("no column '{}'", id.label()));
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("pearson: vectors differ in length");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw StatsError("correlation undefined for a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("spearman: vectors differ in length");
  if (x.size() < 3) throw StatsError(fmt::format("spearman needs n >= 3, got {}", x.size()));
  if (!has_two_distinct(x) || !has_two_distinct(y))
    throw StatsError("correlation undefined for a constant vector");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return pearson(rx, ry);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw StatsError("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(std::span<const double> x, std::span<const double> y,
                             std::size_t replicates, double alpha, std::uint64_t seed) {
  constexpr int kMaxRedraws = 20;
  if (x.size() != y.size()) throw StatsError("bootstrap: vectors differ in length");
  if (x.size() < 3) throw StatsError(fmt::format("bootstrap needs n >= 3, got {}", x.size()));
  if (replicates < 100) throw StatsError("bootstrap needs at least 100 replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("alpha must lie in (0, 1)");

  const std::size_t n = x.size();
  std::vector<double> rhos;
  rhos.reserve(replicates);
  std::vector<double> bx(n), by(n);
  std::size_t degenerate = 0;
  for (std::size_t b = 0; b < replicates; ++b) {
    Rng rng = make_rng(seed, "bootstrap", b);
    bool drawn = false;
    for (int attempt = 0; attempt <= kMaxRedraws && !drawn; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = uniform_index(rng, n);
        bx[i] = x[j];
        by[i] = y[j];
      }
      if (has_two_distinct(bx) && has_two_distinct(by)) {
        drawn = true;
      } else {
        ++degenerate;
      }
    }
    if (!drawn || 2 * degenerate > replicates + degenerate)
      throw StatsError("input too degenerate: most bootstrap resamples are constant");
    rhos.push_back(pearson(midranks(bx), midranks(by)));
  }
  std::sort(rhos.begin(), rhos.end());
  BootstrapResult out;
  out.interval = {quantile_sorted(rhos, alpha / 2.0), quantile_sorted(rhos, 1.0 - alpha / 2.0)};
  out.replicates = replicates;
  out.degenerate_redraws = degenerate;
  return out;
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            std::size_t replicates, double alpha, std::uint64_t seed) {
  CorrelationResult out;
  out.rho = spearman(x, y);
  out.n = x.size();
  const BootstrapResult boot = bootstrap_ci(x, y, replicates, alpha, seed);
  out.ci_low = std::min(boot.interval.low, out.rho);
  out.ci_high = std::max(boot.interval.high, out.rho);
  out.replicates = boot.replicates;
  return out;
}

Paired pair_up(const std::map<std::string, double>& x, const std::map<std::string, double>& y) {
  Paired p;
  for (const auto& [id, vx] : x) {
    auto it = y.find(id);
    if (it == y.end()) continue;
    p.ids.push_back(id);
    p.x.push_back(vx);
    p.y.push_back(it->second);
  }
  return p;
}

UnitAggregate aggregate_across_units(std::span<const double> rhos) {
  if (rhos.size() < 2) throw StatsError("aggregation needs at least two unit correlations");
  const auto m = static_cast<double>(rhos.size());
  const double mean = std::accumulate(rhos.begin(), rhos.end(), 0.0) / m;
  double ss = 0.0;
  for (double r : rhos) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / (m - 1.0));
  const boost::math::students_t dist(m - 1.0);
  const double half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(m);
  return {mean, std::max(-1.0, mean - half), std::min(1.0, mean + half)};
}

double binomial_tail(int k, int n) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  if (n < 1) throw std::invalid_argument("binomial_tail needs n >= 1");
  if (k < 0 || k > n) throw std::invalid_argument(fmt::format("binomial_tail: k={} outside 0..{}", k, n));
  // Running C(n, i) for i = 0..n, summing the upper tail.
  cpp_int coeff = 1;
  cpp_int tail = 0;
  for (int i = 0; i <= n; ++i) {
    if (i >= k) tail += coeff;
    coeff = coeff * (n - i) / (i + 1);
  }
  const cpp_int total = cpp_int(1) << n;
  return static_cast<double>(cpp_rational(tail, total));
}

SignTestResult sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("sign_test: vectors differ in length");
  SignTestResult out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    ++out.n;
    if (a[i] > b[i]) ++out.k;
  }
  out.p_value = out.n == 0 ? 1.0 : binomial_tail(out.k, out.n);
  return out;
}

}  // namespace rqa
