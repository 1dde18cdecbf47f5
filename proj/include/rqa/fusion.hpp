#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rqa/corpus.hpp"
#include "rqa/stats.hpp"

namespace rqa {

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-article fused value, aligned with ScoreMatrix::rows; absent when the
/// article has no available column.
using FusedVector = std::vector<std::optional<double>>;

FusedVector mean_fusion(const ScoreMatrix& matrix);
FusedVector median_fusion(const ScoreMatrix& matrix);

/// Mid-ranks per column (over the articles present in that column), averaged
/// per article.
FusedVector rank_average_fusion(const ScoreMatrix& matrix);

/// Spearman of a fused vector against gold over articles present in both.
double fused_spearman(const ScoreMatrix& matrix, const FusedVector& fused,
                      const GoldStandard& gold);

struct DeParams {
  std::size_t population = 40;
  double mutation = 0.8;    // F
  double crossover = 0.9;   // CR
  std::size_t generations = 200;
  double lower = 0.0;
  double upper = 1.0;
};

struct FusionWeights {
  std::vector<double> w;
  double objective = 0.0;
  /// Best objective after each generation (index 0 = initial population).
  std::vector<double> history;
};

/// Rows usable for weighted fusion: every column present and a gold score.
struct FusionData {
  std::vector<std::string> ids;
  std::vector<int> units;
  /// columns[c][i]
  std::vector<std::vector<double>> columns;
  std::vector<double> gold;
};

FusionData fusion_data(const ScoreMatrix& matrix, const GoldStandard& gold,
                       const std::map<std::string, int>& unit_of = {});

std::vector<double> weighted_sum(const FusionData& data, const std::vector<double>& w);

/// Maximises spearman(sum_i w_i * column_i, gold) over w in [lower, upper]^d
/// with DE/rand/1/bin and elitist replacement; out-of-bound trial
/// components are projected back onto the bounds.
FusionWeights de_optimize(const FusionData& data, const DeParams& params, std::uint64_t seed);

/// Fold index (0-based) per row. Rows are shuffled within each unit and
/// dealt round-robin, so fold sizes differ by at most one and each fold
/// mirrors the unit mix.
std::vector<int> assign_folds(const std::vector<std::string>& ids, const std::vector<int>& units,
                              int folds, std::uint64_t seed);

struct CvResult {
  double mean_rho = 0.0;
  std::vector<double> fold_rhos;
  std::vector<FusionWeights> fold_weights;
};

inline constexpr int kDefaultFolds = 10;

CvResult cv_fusion(const FusionData& data, int folds, std::uint64_t seed, const DeParams& params);

struct BestSingle {
  std::string column;
  double rho = 0.0;
};

BestSingle best_single(const ScoreMatrix& matrix, const GoldStandard& gold);

/// One fused-correlation table row, columns in reporting order.
struct FusionRow {
  std::string label;
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double best_single = 0.0;
  double rank_average = 0.0;
  double cv_mean = 0.0;
  std::string best_column;
  CvResult cv;
};

FusionRow fusion_row(const std::string& label, const ScoreMatrix& matrix, const GoldStandard& gold,
                     const std::map<std::string, int>& unit_of, int folds, std::uint64_t seed,
                     const DeParams& params);

/// Replaces each column's scores and the gold scores by within-unit
/// normalised mid-ranks (rank / unit size) so units can be pooled.
std::pair<ScoreMatrix, GoldStandard> unit_rank_normalise(const ScoreMatrix& matrix,
                                                         const GoldStandard& gold,
                                                         const std::map<std::string, int>& unit_of);

}  // namespace rqa
