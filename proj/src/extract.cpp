#include "rqa/extract.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace rqa {

namespace {

constexpr std::string_view kOpenTag = "<think>";
constexpr std::string_view kCloseTag = "</think>";

constexpr auto kFlags = std::regex::ECMAScript | std::regex::icase | std::regex::optimize;

// "Score: 3*", "**Score:** 3", "Overall rating: 3.5*", "Score: 3/4".
const std::regex& labeled_overall() {
  static const std::regex re(
      R"(\b(?:score|overall(?:\s+(?:quality|rating|assessment))?)\s*\**\s*[:=]\s*\**\s*(\d+(?:\.\d+)?)(?:\s*/\s*(\d+))?)",
      kFlags);
  return re;
}

// "3* (Internationally Excellent)", "4* - World-leading".
const std::regex& descriptor_overall() {
  static const std::regex re(
      R"((\d+(?:\.\d+)?)\s*\*+\s*\**\s*(?:\(|-|:|\xE2\x80\x93)?\s*\**\s*(?:world[- ]leading|internationally|nationally))",
      kFlags);
  return re;
}

// "Originality (3*)", "Rigour (3/4)".
const std::regex& paren_subscore() {
  static const std::regex re(
      R"(\b(originality|significance|rigou?r)\b\s*(?:score)?\s*\**\s*\(\s*\**\s*(\d+(?:\.\d+)?)\s*(?:\*|/\s*(\d+))?\s*\**\s*\))",
      kFlags);
  return re;
}

// "Originality: 3*", "Significance: 3/4", "Rigour score: 2.5".
const std::regex& colon_subscore() {
  static const std::regex re(
      R"(\b(originality|significance|rigou?r)\b\s*(?:score)?\s*\**\s*[:=]\s*\**\s*(\d+(?:\.\d+)?)(?:\s*\*|\s*/\s*(\d+))?)",
      kFlags);
  return re;
}

// "Article 2: 3*", "Article 1 : Score 1*", "Article 3: 3.5/4".
const std::regex& enumerated_article() {
  static const std::regex re(
      R"(\barticle\s*(\d+)\s*\**\s*(?::|-|\xE2\x80\x93)\s*\**\s*(?:score\s*[:=]?\s*)?\**\s*(\d+(?:\.\d+)?)\s*(?:\*|/\s*4\b))",
      kFlags);
  return re;
}

const std::regex& dimension_word() {
  static const std::regex re(R"(\b(?:originality|significance|rigou?r)\b)", kFlags);
  return re;
}

// True when the line containing `pos` names a quality dimension before `pos`.
bool on_dimension_line(std::string_view text, std::size_t pos) {
  const std::size_t line_start = text.rfind('\n', pos == 0 ? 0 : pos - 1);
  const std::size_t from = line_start == std::string_view::npos ? 0 : line_start + 1;
  if (from >= pos) return false;
  const std::string prefix(text.substr(from, pos - from));
  return std::regex_search(prefix, dimension_word());
}

struct Hit {
  std::size_t pos;
  double value;
};

double to_number(const std::string& s) { return std::stod(s); }

std::optional<double> denominator_ok(const std::csub_match& den, double value) {
  if (den.matched && den.str() != "4") return std::nullopt;
  return value;
}

}  // namespace

std::string ReportSections::reassemble() const {
  if (!thinking) return report;
  std::string out = report.substr(0, think_offset);
  out += kOpenTag;
  out += *thinking;
  if (closed) out += kCloseTag;
  out += report.substr(think_offset);
  return out;
}

std::vector<std::string> ScoreFlags::names() const {
  std::vector<std::string> out;
  if (has(ScoreFlag::multi_article)) out.emplace_back("multi_article");
  if (has(ScoreFlag::no_score_found)) out.emplace_back("no_score_found");
  if (has(ScoreFlag::out_of_range_clamped)) out.emplace_back("out_of_range_clamped");
  if (has(ScoreFlag::subscore_fallback)) out.emplace_back("subscore_fallback");
  return out;
}

ScoreFlags ScoreFlags::from_names(const std::vector<std::string>& names) {
  ScoreFlags f;
  for (const auto& n : names) {
    if (n == "multi_article") f.set(ScoreFlag::multi_article);
    else if (n == "no_score_found") f.set(ScoreFlag::no_score_found);
    else if (n == "out_of_range_clamped") f.set(ScoreFlag::out_of_range_clamped);
    else if (n == "subscore_fallback") f.set(ScoreFlag::subscore_fallback);
  }
  return f;
}

ReportSections split_reasoning(std::string_view text) {
  ReportSections out;
  const std::size_t open = text.find(kOpenTag);
  if (open == std::string_view::npos) {
    out.report = std::string(text);
    return out;
  }
  const std::size_t body = open + kOpenTag.size();
  const std::size_t close = text.find(kCloseTag, body);
  out.think_offset = open;
  out.report = std::string(text.substr(0, open));
  if (close == std::string_view::npos) {
    out.thinking = std::string(text.substr(body));
    return out;
  }
  out.closed = true;
  out.thinking = std::string(text.substr(body, close - body));
  out.report += text.substr(close + kCloseTag.size());
  return out;
}

ParsedScore parse_scores(std::string_view report) {
  ParsedScore out;
  const char* begin = report.data();
  const char* end = report.data() + report.size();

  auto clamp_value = [&out](double v) {
    if (v < 1.0 || v > 4.0) {
      out.flags.set(ScoreFlag::out_of_range_clamped);
      return std::clamp(v, 1.0, 4.0);
    }
    return v;
  };

  std::vector<Hit> labeled;
  for (std::cregex_iterator it(begin, end, labeled_overall()), last; it != last; ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    if (on_dimension_line(report, pos)) continue;
    if (auto v = denominator_ok(m[2], to_number(m[1].str()))) labeled.push_back({pos, *v});
  }
  std::vector<Hit> described;
  if (labeled.empty()) {
    for (std::cregex_iterator it(begin, end, descriptor_overall()), last; it != last; ++it) {
      const auto pos = static_cast<std::size_t>(it->position(0));
      if (on_dimension_line(report, pos)) continue;
      described.push_back({pos, to_number((*it)[1].str())});
    }
  }
  if (!labeled.empty())
    out.overall = clamp_value(labeled.back().value);
  else if (!described.empty())
    out.overall = clamp_value(described.back().value);

  // Sub-scores: the last occurrence of each dimension wins across both forms.
  struct DimHit {
    std::size_t pos = 0;
    std::optional<double> value;
  };
  DimHit dims[3];
  auto record_dim = [&](const std::string& name, std::size_t pos, double value) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
    const int idx = c == 'o' ? 0 : c == 's' ? 1 : 2;
    if (!dims[idx].value || pos >= dims[idx].pos) dims[idx] = {pos, value};
  };
  for (const std::regex* re : {&paren_subscore(), &colon_subscore()}) {
    for (std::cregex_iterator it(begin, end, *re), last; it != last; ++it) {
      const auto& m = *it;
      if (auto v = denominator_ok(m[3], to_number(m[2].str())))
        record_dim(m[1].str(), static_cast<std::size_t>(m.position(0)), *v);
    }
  }
  if (dims[0].value) out.originality = clamp_value(*dims[0].value);
  if (dims[1].value) out.significance = clamp_value(*dims[1].value);
  if (dims[2].value) out.rigour = clamp_value(*dims[2].value);

  if (!out.overall && !out.originality && !out.significance && !out.rigour)
    out.flags.set(ScoreFlag::no_score_found);
  return out;
}

bool detect_multi_article(std::string_view report) {
  std::set<std::string> articles;
  for (std::cregex_iterator it(report.data(), report.data() + report.size(), enumerated_article()),
       last;
       it != last; ++it) {
    articles.insert((*it)[1].str());
    if (articles.size() >= 2) return true;
  }
  return false;
}

EffectiveScore effective_score(const ParsedScore& parsed, bool multi) {
  EffectiveScore out;
  out.flags = parsed.flags;
  if (multi) {
    out.flags.set(ScoreFlag::multi_article);
    return out;
  }
  if (parsed.overall) {
    out.value = parsed.overall;
    return out;
  }
  double sum = 0.0;
  int count = 0;
  for (const auto& sub : {parsed.originality, parsed.significance, parsed.rigour}) {
    if (sub) {
      sum += *sub;
      ++count;
    }
  }
  if (count > 0) {
    out.value = sum / count;
    out.flags.set(ScoreFlag::subscore_fallback);
  }
  return out;
}

Extraction extract_report(std::string_view raw_text) {
  const ReportSections sections = split_reasoning(raw_text);
  Extraction out;
  out.had_thinking = sections.thinking.has_value();
  out.parsed = parse_scores(sections.report);
  const EffectiveScore eff = effective_score(out.parsed, detect_multi_article(sections.report));
  out.parsed.flags = eff.flags;
  out.effective = eff.value;
  return out;
}

}  // namespace rqa
