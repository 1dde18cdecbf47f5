#include "rqa/mock.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "rqa/rng.hpp"

namespace rqa {

namespace {

constexpr std::array kFindings = {
    "The study reports a clearly framed research question and a coherent design.",
    "The methods are described in enough detail to support replication.",
    "The sample is modest, which limits how far the findings generalise.",
    "The work extends an established line of enquiry rather than opening a new one.",
    "The analysis is appropriate, although some robustness checks are missing.",
    "The findings could inform clinical practice if confirmed in larger cohorts.",
    "The contribution is incremental but carefully executed.",
    "The mechanistic insight is novel and well supported by the experiments.",
};

constexpr std::array kCriticisms = {
    "Constructive criticism: a preregistered protocol would strengthen the rigour.",
    "Constructive criticism: external validation would increase the significance.",
    "Constructive criticism: the limitations section could be more explicit.",
};

std::string star_text(double score) {
  if (score == std::floor(score)) return fmt::format("{}", static_cast<int>(score));
  return fmt::format("{:.1f}", score);
}

const char* descriptor(double score) {
  if (score >= 3.75) return "World-leading";
  if (score >= 2.75) return "Internationally Excellent";
  if (score >= 1.75) return "Internationally Recognised";
  return "Nationally Recognised";
}

std::string pick(Rng& rng, const auto& bank) {
  return bank[uniform_index(rng, bank.size())];
}

}  // namespace

std::string_view to_string(ReportStyle style) {
  switch (style) {
    case ReportStyle::plain: return "plain";
    case ReportStyle::reasoning: return "reasoning";
    case ReportStyle::subscores_only: return "subscores-only";
    case ReportStyle::multi_article: return "multi-article";
  }
  return "plain";
}

ReportStyle report_style_from_string(std::string_view text) {
  if (text == "plain") return ReportStyle::plain;
  if (text == "reasoning") return ReportStyle::reasoning;
  if (text == "subscores-only") return ReportStyle::subscores_only;
  if (text == "multi-article") return ReportStyle::multi_article;
  throw std::invalid_argument(fmt::format("unknown report style '{}'", text));
}

double simulated_score(double latent_quality, double noise_sd, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "mock-noise"));
  const double noisy = latent_quality + noise_sd * standard_normal(rng);
  return std::round(std::clamp(noisy, 1.0, 4.0) * 2.0) / 2.0;
}

std::string simulate_completion(double latent_quality, double noise_sd, std::uint64_t seed,
                                ReportStyle style) {
  if (noise_sd < 0.0) throw std::invalid_argument("noise sd must be non-negative");
  const double score = simulated_score(latent_quality, noise_sd, seed);
  const std::string s = star_text(score);
  Rng rng(derive_seed(seed, "mock-text"));

  switch (style) {
    case ReportStyle::plain:
      return fmt::format(
          "**Evaluation of the article**\n\n{}\n{}\n\n**Score: {}* ({})**\n\n{}\n", pick(rng, kFindings),
          pick(rng, kFindings), s, descriptor(score), pick(rng, kCriticisms));

    case ReportStyle::reasoning: {
      // The deliberation rehearses a different candidate before settling.
      const double other = score >= 2.5 ? score - 1.0 : score + 1.0;
      return fmt::format(
          "<think> Okay, let's start by reading the abstract. {} At first glance this might be "
          "Score: {}* territory. {} Looking at the criteria again, overall it's {}*. </think>\n\n"
          "****Score: {}*****\n\n****Reasoning:****\n\n**Originality ({}*)** {}\n",
          pick(rng, kFindings), star_text(other), pick(rng, kFindings), s, s, s,
          pick(rng, kFindings));
    }

    case ReportStyle::subscores_only: {
      // Three dimensions whose plain mean is exactly the embedded score.
      double lo = score, hi = score;
      if (score >= 1.5 && score <= 3.5) {
        lo = score - 0.5;
        hi = score + 0.5;
      }
      return fmt::format(
          "Based on the provided abstract, here is my assessment.\n\n"
          "* **Originality: {}/4** {}\n* **Significance: {}/4** {}\n* **Rigour: {}/4** {}\n",
          star_text(lo), pick(rng, kFindings), s, pick(rng, kFindings), star_text(hi),
          pick(rng, kFindings));
    }

    case ReportStyle::multi_article:
      return fmt::format(
          "Based on the provided abstracts, I will evaluate each article's originality, "
          "significance, and rigour.\n\n{}\n\n**Final Scores:**\n- Article 1: 1*\n- Article 2: 2*\n"
          "- Article 3: 3*\n- Article 4: 4*\n- Article 5: {}*\n",
          pick(rng, kFindings), s);
  }
  return {};
}

double MockBackend::latent_for(const std::string& article_id) const {
  if (auto it = settings_.latent.find(article_id); it != settings_.latent.end()) return it->second;
  Rng rng(derive_seed(settings_.seed, "mock-latent", stable_hash(article_id)));
  return 1.0 + 3.0 * uniform01(rng);
}

Completion MockBackend::complete(const ModelConfig& cfg, const CompletionTask& task) {
  const std::uint64_t seed = derive_seed(settings_.seed, "mock", stable_hash(cache_key(task, cfg)));
  Rng rng(derive_seed(seed, "mock-style"));
  const double noise = cfg.mock_noise_sd.value_or(settings_.noise_sd);

  ReportStyle style;
  if (cfg.mock_style == "mixed") {
    constexpr std::array styles = {ReportStyle::plain, ReportStyle::reasoning,
                                   ReportStyle::subscores_only};
    style = styles[uniform_index(rng, styles.size())];
  } else {
    style = report_style_from_string(cfg.mock_style);
  }
  if (task.key.strategy == Strategy::few && uniform01(rng) < settings_.multi_article_rate)
    style = ReportStyle::multi_article;

  std::string text = simulate_completion(latent_for(task.key.article_id), noise, seed, style);

  // Zero-shot and few-shot reports differ in characteristic phrasing.
  if (task.key.strategy == Strategy::zero) {
    if (uniform01(rng) < 0.9) text = "Evaluation summary for the submitted article.\n\n" + text;
  } else {
    if (uniform01(rng) < 0.7)
      text = "In comparison to the example articles provided, this article is assessed below.\n\n" +
             text;
  }
  return {std::move(text), 1, 0.0};
}

}  // namespace rqa
