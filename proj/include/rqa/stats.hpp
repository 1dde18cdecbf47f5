#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rqa/extract.hpp"
#include "rqa/llm_gateway.hpp"

namespace rqa {

/// Raised when a correlation is undefined (constant input, too few pairs).
class StatsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A raw record after extraction.
struct ParsedRecord {
  TaskKey key;
  RecordStatus status = RecordStatus::failed;
  ParsedScore parsed;
  std::optional<double> effective;
};

std::string parsed_to_jsonl(const ParsedRecord& record);
ParsedRecord parsed_from_jsonl(const std::string& line);

struct ColumnId {
  std::string model;
  Strategy strategy = Strategy::zero;

  std::string label() const;
  auto operator<=>(const ColumnId&) const = default;
};

struct Cell {
  double mean = 0.0;
  int effective_k = 0;
};

/// Article id -> averaged score for one (model, strategy) column. Articles
/// with no usable iteration are absent.
using ScoreColumn = std::map<std::string, Cell>;

/// Averages effective scores per article over ok, single-article records.
ScoreColumn mean_over_iterations(std::span<const ParsedRecord> records);

/// Articles x (model, strategy) grid of iteration-averaged scores.
struct ScoreMatrix {
  std::vector<std::string> rows;
  std::vector<ColumnId> columns;
  /// cells[r][c]
  std::vector<std::vector<std::optional<Cell>>> cells;

  static ScoreMatrix from_records(std::span<const ParsedRecord> records);
  /// Restricts to the given rows (in that order).
  ScoreMatrix select_rows(const std::vector<std::string>& ids) const;
  std::vector<std::optional<double>> column_values(std::size_t c) const;
  std::size_t column_index(const ColumnId& id) const;
};

/// Mid-ranks (1-based; tied values share the mean of their positions).
std::vector<double> midranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of mid-ranks. Requires n >= 3 and two distinct values
/// in each vector.
double spearman(std::span<const double> x, std::span<const double> y);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapResult {
  Interval interval;
  std::size_t replicates = 0;
  std::size_t degenerate_redraws = 0;
};

inline constexpr std::size_t kDefaultBootstrapReplicates = 1000;
inline constexpr double kDefaultAlpha = 0.05;

/// Percentile interval over `replicates` paired resamples. Replicate i draws
/// from the substream derived from (seed, i). Resamples with a constant side
/// are redrawn; more than half the draws being degenerate is an error.
BootstrapResult bootstrap_ci(std::span<const double> x, std::span<const double> y,
                             std::size_t replicates, double alpha, std::uint64_t seed);

struct CorrelationResult {
  double rho = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
  std::size_t replicates = 0;
};

/// Spearman rho plus bootstrap interval. The interval is widened to include
/// rho when the percentile bounds fall on one side of it.
CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            std::size_t replicates, double alpha, std::uint64_t seed);

/// Pairs present in both; ids in map order.
struct Paired {
  std::vector<std::string> ids;
  std::vector<double> x;
  std::vector<double> y;
};
Paired pair_up(const std::map<std::string, double>& x, const std::map<std::string, double>& y);

struct UnitAggregate {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Mean of per-unit correlations with a t interval (0.975 quantile, m - 1
/// degrees of freedom), clipped to [-1, 1].
UnitAggregate aggregate_across_units(std::span<const double> rhos);

/// Exact P(X >= k) for X ~ Binomial(n, 1/2).
double binomial_tail(int k, int n);

struct SignTestResult {
  int k = 0;
  int n = 0;
  double p_value = 1.0;
};

/// Counts pairs where a beats b; tied pairs are dropped from n.
SignTestResult sign_test(std::span<const double> a, std::span<const double> b);

/// Linear-interpolation quantile of a sorted sample (q in [0, 1]).
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace rqa
