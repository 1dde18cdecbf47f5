#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "rqa/llm_gateway.hpp"

namespace rqa {

enum class ReportStyle { plain, reasoning, subscores_only, multi_article };

std::string_view to_string(ReportStyle style);
ReportStyle report_style_from_string(std::string_view text);

/// Star score a mock report embeds: round-to-half(clamp(latent + noise, 1, 4)).
double simulated_score(double latent_quality, double noise_sd, std::uint64_t seed);

/// Synthetic assessor report in one of the observed output styles, embedding
/// simulated_score(latent_quality, noise_sd, seed). Deterministic given seed.
std::string simulate_completion(double latent_quality, double noise_sd, std::uint64_t seed,
                                ReportStyle style);

struct MockSettings {
  std::uint64_t seed = 0;
  double noise_sd = 0.5;
  /// Probability that a few-shot call produces a multi-article report.
  double multi_article_rate = 0.0;
  /// Latent quality per article; unknown ids get a hash-derived value in [1, 4].
  std::map<std::string, double> latent;
};

/// Offline backend. Each task's response is a pure function of the settings
/// and the task's cache key, so identical batches reproduce byte for byte.
/// ModelConfig::mock_style selects the report style ("mixed" rotates through
/// the single-score styles per call).
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(MockSettings settings) : settings_(std::move(settings)) {}
  Completion complete(const ModelConfig& cfg, const CompletionTask& task) override;

  double latent_for(const std::string& article_id) const;

 private:
  MockSettings settings_;
};

}  // namespace rqa
