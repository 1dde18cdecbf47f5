#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rqa {

/// Report split around the first `<think>...</think>` span.
struct ReportSections {
  std::optional<std::string> thinking;
  std::string report;
  /// Offset in the original text where the thinking span started.
  std::size_t think_offset = 0;
  bool closed = false;

  /// Reassembles the original bytes (tags reinserted at think_offset).
  std::string reassemble() const;
};

enum class ScoreFlag : std::uint8_t {
  multi_article = 1 << 0,
  no_score_found = 1 << 1,
  out_of_range_clamped = 1 << 2,
  subscore_fallback = 1 << 3,
};

class ScoreFlags {
 public:
  ScoreFlags() = default;
  void set(ScoreFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
  bool has(ScoreFlag f) const { return bits_ & static_cast<std::uint8_t>(f); }
  bool empty() const { return bits_ == 0; }
  std::vector<std::string> names() const;
  static ScoreFlags from_names(const std::vector<std::string>& names);
  bool operator==(const ScoreFlags&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct ParsedScore {
  std::optional<double> overall;
  std::optional<double> originality;
  std::optional<double> significance;
  std::optional<double> rigour;
  ScoreFlags flags;

  bool operator==(const ParsedScore&) const = default;
};

ReportSections split_reasoning(std::string_view text);

/// Pattern pass over a report (reasoning already removed). Labeled overall
/// forms take priority over star-descriptor forms; within the winning form
/// the last match wins. Values are clamped to [1, 4].
ParsedScore parse_scores(std::string_view report);

/// True when the report scores two or more enumerated articles.
bool detect_multi_article(std::string_view report);

struct EffectiveScore {
  std::optional<double> value;
  ScoreFlags flags;
};

/// Overall score if present, else the mean of the parsed sub-scores; absent
/// for multi-article reports.
EffectiveScore effective_score(const ParsedScore& parsed, bool multi);

/// Full extraction of one raw response.
struct Extraction {
  ParsedScore parsed;
  std::optional<double> effective;
  bool had_thinking = false;
};

Extraction extract_report(std::string_view raw_text);

}  // namespace rqa
