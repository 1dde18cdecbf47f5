#include "rqa/violin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "rqa/io.hpp"
#include "rqa/stats.hpp"

namespace rqa {

double silverman_bandwidth(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& sorted,
                                                      double bandwidth) {
  if (sorted.empty() || !(bandwidth > 0.0)) return {};
  const double step = (kScoreMax - kScoreMin) / static_cast<double>(kDensityGridPoints - 1);
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  auto kernel = [&](double u) { return std::exp(-0.5 * u * u); };

  std::vector<std::pair<double, double>> curve(kDensityGridPoints);
  for (std::size_t g = 0; g < kDensityGridPoints; ++g) {
    const double x = kScoreMin + step * static_cast<double>(g);
    double sum = 0.0;
    for (double v : sorted) {
      sum += kernel((x - v) / bandwidth);
      sum += kernel((x - (2.0 * kScoreMin - v)) / bandwidth);
      sum += kernel((x - (2.0 * kScoreMax - v)) / bandwidth);
    }
    curve[g] = {x, sum * norm};
  }
  double area = 0.0;
  for (std::size_t g = 1; g < curve.size(); ++g)
    area += 0.5 * step * (curve[g].second + curve[g - 1].second);
  if (area > 0.0)
    for (auto& p : curve) p.second /= area;
  return curve;
}

ViolinSummary violin_summary(const std::map<std::string, double>& scores, const GoldStandard& gold,
                             std::string label) {
  ViolinSummary out;
  out.label = std::move(label);
  std::map<int, std::vector<double>> by_level;
  for (const auto& [id, score] : scores) {
    auto g = gold.scores.find(id);
    if (g == gold.scores.end()) continue;
    if (g->second != std::floor(g->second)) {
      ++out.discarded_non_integer;
      continue;
    }
    by_level[static_cast<int>(g->second)].push_back(score);
  }
  if (by_level.empty()) throw ViolinError("no article has an integer gold score");

  for (auto& [level, values] : by_level) {
    std::sort(values.begin(), values.end());
    ViolinGroup grp;
    grp.gold_level = level;
    grp.count = values.size();
    grp.min = values.front();
    grp.max = values.back();
    grp.q1 = quantile_sorted(values, 0.25);
    grp.median = quantile_sorted(values, 0.5);
    grp.q3 = quantile_sorted(values, 0.75);
    grp.bandwidth = silverman_bandwidth(values);
    grp.density = kernel_density(values, grp.bandwidth);
    out.groups.push_back(std::move(grp));
  }
  return out;
}

std::string violin_csv(const ViolinSummary& s) {
  std::string out =
      "# quartiles by linear interpolation between order statistics; Gaussian KDE, Silverman "
      "bandwidth, 101-point grid over [1,4], reflected at the bounds\n"
      "gold_level,count,min,q1,median,q3,max,bandwidth\n";
  for (const auto& g : s.groups) {
    out += csv_row({std::to_string(g.gold_level), std::to_string(g.count), format_number(g.min),
                    format_number(g.q1), format_number(g.median), format_number(g.q3),
                    format_number(g.max), format_number(g.bandwidth)});
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string px(double v) { return format_number(v, 2); }

}  // namespace

std::string violin_svg(const ViolinSummary& s) {
  if (s.groups.empty()) throw ViolinError("violin summary is empty");
  constexpr double kSlot = 120.0, kLeft = 60.0, kTop = 30.0, kPlotH = 300.0, kBottom = 50.0;
  const double width = kLeft + kSlot * static_cast<double>(s.groups.size()) + 20.0;
  const double height = kTop + kPlotH + kBottom;
  auto y_of = [&](double score) {
    return kTop + kPlotH * (kScoreMax - score) / (kScoreMax - kScoreMin);
  };

  std::string out = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
      px(width), px(height), px(width), px(height));
  if (!s.label.empty())
    out += fmt::format("  <title>{}</title>\n", xml_escape(s.label));
  out += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Score axis with gridlines at each star level.
  out += fmt::format("  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                     px(kLeft), px(kTop), px(kTop + kPlotH));
  for (int level = 1; level <= 4; ++level) {
    const double y = y_of(level);
    out += fmt::format(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n"
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        px(kLeft), px(y), px(width - 20.0), px(y), px(kLeft - 6.0), px(y + 4.0), level);
  }
  out += fmt::format(
      "  <text x=\"14\" y=\"{0}\" font-size=\"13\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 14 {0})\">Score</text>\n",
      px(kTop + kPlotH / 2.0));
  out += fmt::format(
      "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">Gold score</text>\n",
      px(kLeft + kSlot * static_cast<double>(s.groups.size()) / 2.0), px(height - 10.0));

  for (std::size_t i = 0; i < s.groups.size(); ++i) {
    const ViolinGroup& g = s.groups[i];
    const double cx = kLeft + kSlot * (static_cast<double>(i) + 0.5);
    out += fmt::format("  <g class=\"violin\" data-gold=\"{}\" data-count=\"{}\">\n", g.gold_level, g.count);

    if (!g.density.empty()) {
      double peak = 0.0;
      for (const auto& [x, d] : g.density) peak = std::max(peak, d);
      const double scale = peak > 0.0 ? (kSlot * 0.42) / peak : 0.0;
      std::string path;
      for (std::size_t k = 0; k < g.density.size(); ++k) {
        const auto& [x, d] = g.density[k];
        path += fmt::format("{}{},{} ", k == 0 ? "M" : "L", px(cx + d * scale), px(y_of(x)));
      }
      for (std::size_t k = g.density.size(); k-- > 0;) {
        const auto& [x, d] = g.density[k];
        path += fmt::format("L{},{} ", px(cx - d * scale), px(y_of(x)));
      }
      path += "Z";
      out += fmt::format(
          "    <path d=\"{}\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"1\"/>\n", path);
    } else {
      // Zero spread: a flat marker at the common value.
      out += fmt::format(
          "    <line class=\"degenerate\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#3182bd\" "
          "stroke-width=\"3\"/>\n",
          px(cx - kSlot * 0.3), px(y_of(g.median)), px(cx + kSlot * 0.3), px(y_of(g.median)));
    }
    out += fmt::format(
        "    <line class=\"whisker\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
        px(cx), px(y_of(g.min)), px(y_of(g.max)));
    out += fmt::format(
        "    <line class=\"median\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" "
        "stroke-width=\"2\"/>\n",
        px(cx - kSlot * 0.2), px(y_of(g.median)), px(cx + kSlot * 0.2), px(y_of(g.median)));
    out += fmt::format(
        "    <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}* (n={})</text>\n",
        px(cx), px(kTop + kPlotH + 18.0), g.gold_level, g.count);
    out += "  </g>\n";
  }
  out += "</svg>\n";
  return out;
}

void emit_violin_svg(const ViolinSummary& summary, const std::filesystem::path& path) {
  write_file_atomic(path, violin_svg(summary));
}

}  // namespace rqa
