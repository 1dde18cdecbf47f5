#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rqa/corpus.hpp"

namespace rqa {

/// Settings for a synthetic experiment directory (articles, gold files,
/// few-shot pool, system prompt, config) used by tests and demos.
struct FixtureSpec {
  std::vector<int> units = {1, 2, 3, 4, 5, 6};
  std::size_t articles_per_unit = 100;
  std::size_t sample_per_unit = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> models = {"mock-a", "mock-b"};
  int iterations = 5;
  double noise_sd = 0.6;
  bool write_prompts = true;
};

struct FixtureFiles {
  std::filesystem::path dir;
  std::filesystem::path config;
  /// Hidden latent quality per article in [1, 4].
  std::map<std::string, double> latent;
};

/// Articles meant to survive eligibility screening, with a latent quality each.
std::vector<std::pair<Article, double>> synthetic_articles(const FixtureSpec& spec);

FixtureFiles write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec);

/// Text of the bundled assessor instructions.
std::string default_system_prompt();

}  // namespace rqa
