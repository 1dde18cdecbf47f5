#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rqa/corpus.hpp"

namespace rqa {

class ViolinError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDensityGridPoints = 101;
inline constexpr double kScoreMin = 1.0;
inline constexpr double kScoreMax = 4.0;

struct ViolinGroup {
  int gold_level = 0;
  std::size_t count = 0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double bandwidth = 0.0;
  /// (score, density) over [1, 4]; empty when the group has zero spread.
  std::vector<std::pair<double, double>> density;
};

struct ViolinSummary {
  std::string label;
  std::vector<ViolinGroup> groups;
  std::size_t discarded_non_integer = 0;
};

/// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(const std::vector<double>& sorted);

/// Gaussian kernel density on the 101-point grid over [1, 4], with the
/// kernels reflected at both ends and the curve normalised to unit
/// trapezoid area.
std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& sorted,
                                                      double bandwidth);

/// Groups scores by integer gold level (non-integer gold discarded) and
/// summarises each group.
ViolinSummary violin_summary(const std::map<std::string, double>& scores, const GoldStandard& gold,
                             std::string label = {});

std::string violin_csv(const ViolinSummary& summary);

std::string violin_svg(const ViolinSummary& summary);

void emit_violin_svg(const ViolinSummary& summary, const std::filesystem::path& path);

}  // namespace rqa
