#include "rqa/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "rqa/io.hpp"
#include "rqa/rng.hpp"

namespace rqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array kWords = {
    "cohort",     "randomised", "trial",      "patients",   "outcomes",  "expression",
    "pathway",    "receptor",   "mortality",  "incidence",  "screening", "intervention",
    "protein",    "signalling", "genome",     "population", "clinical",  "therapy",
    "resistance", "exposure",   "community",  "nursing",    "dental",    "cognitive",
    "neural",     "behaviour",  "livestock",  "crop",       "soil",      "microbial",
    "infection",  "vaccine",    "diet",       "obesity",    "cancer",    "stroke",
    "depression", "anxiety",    "imaging",    "biomarker",  "mechanism", "variation",
    "analysis",   "model",      "evidence",   "association", "risk",     "response",
};

std::string words(Rng& rng, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += kWords[uniform_index(rng, kWords.size())];
  }
  return out;
}

std::string sentence_case(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

Article make_article(Rng& rng, std::string id, int uoa, bool with_doi, std::size_t abstract_words) {
  Article a;
  a.id = std::move(id);
  a.uoa = uoa;
  if (with_doi) a.doi = fmt::format("10.5555/{}", a.id);
  a.title = sentence_case(words(rng, 6 + uniform_index(rng, 7)));
  a.abstract = sentence_case(words(rng, abstract_words)) + ".";
  return a;
}

}  // namespace

std::vector<std::pair<Article, double>> synthetic_articles(const FixtureSpec& spec) {
  std::vector<std::pair<Article, double>> out;
  for (int uoa : spec.units) {
    Rng rng = make_rng(spec.seed, "fixture-articles", static_cast<std::uint64_t>(uoa));
    // Enough articles that the shortest-decile cut still leaves the target.
    const std::size_t n = spec.articles_per_unit + spec.articles_per_unit / 9 + 1;
    for (std::size_t i = 0; i < n; ++i) {
      Article a = make_article(rng, fmt::format("u{}-a{:04d}", uoa, i), uoa, true,
                               40 + uniform_index(rng, 160));
      out.emplace_back(std::move(a), 1.0 + 3.0 * uniform01(rng));
    }
  }
  return out;
}

FixtureFiles write_fixture(const fs::path& dir, const FixtureSpec& spec) {
  fs::create_directories(dir);
  FixtureFiles files;
  files.dir = dir;

  const auto articles = synthetic_articles(spec);
  std::string jsonl;
  ArticleSet set;
  for (const auto& [a, latent] : articles) {
    set.articles.push_back(a);
    files.latent[a.id] = latent;
  }
  // A few ineligible records per unit: missing DOI or missing abstract.
  for (int uoa : spec.units) {
    Rng rng = make_rng(spec.seed, "fixture-ineligible", static_cast<std::uint64_t>(uoa));
    for (int i = 0; i < 3; ++i) {
      Article a = make_article(rng, fmt::format("u{}-x{}", uoa, i), uoa, i != 0, 60);
      if (i == 1) a.abstract.clear();
      set.articles.push_back(std::move(a));
    }
  }
  write_file_atomic(dir / "articles.jsonl", serialize_articles(set));

  Rng gold_rng = make_rng(spec.seed, "fixture-gold");
  std::string latent_csv = "article_id,score\n";
  std::string proxy_csv = "article_id,score\n";
  std::string individual_csv = "article_id,score\n";
  for (const auto& [a, latent] : articles) {
    latent_csv += csv_row({a.id, format_number(latent, 6)});
    // One or two departmental submissions with compressed, noisy means.
    const std::size_t submissions = 1 + uniform_index(gold_rng, 4) / 3;
    for (std::size_t s = 0; s < submissions; ++s) {
      const double dept = std::clamp(2.4 + 0.35 * (latent - 2.5) + 0.25 * standard_normal(gold_rng), 1.0, 4.0);
      proxy_csv += csv_row({a.id, format_number(std::round(dept * 100.0) / 100.0, 2)});
    }
    double star = std::clamp(std::round(latent + 0.4 * standard_normal(gold_rng)), 1.0, 4.0);
    if (uniform01(gold_rng) < 0.04) star += star < 4.0 ? 0.5 : -0.5;
    individual_csv += csv_row({a.id, format_number(star, 1)});
  }
  write_file_atomic(dir / "latent.csv", latent_csv);
  write_file_atomic(dir / "gold_proxy.csv", proxy_csv);
  write_file_atomic(dir / "gold_individual.csv", individual_csv);

  std::string pool;
  for (int uoa : spec.units) {
    Rng rng = make_rng(spec.seed, "fixture-pool", static_cast<std::uint64_t>(uoa));
    for (int star = 1; star <= kStarLevels; ++star) {
      for (int k = 0; k < kExemplarsPerCell; ++k) {
        Article a = make_article(rng, fmt::format("fs-u{}-s{}-{}", uoa, star, k), uoa, true,
                                 60 + uniform_index(rng, 80));
        json j;
        j["id"] = a.id;
        j["uoa"] = a.uoa;
        j["doi"] = *a.doi;
        j["title"] = a.title;
        j["abstract"] = a.abstract;
        j["star"] = star;
        pool += j.dump();
        pool.push_back('\n');
      }
    }
  }
  write_file_atomic(dir / "fewshot_pool.jsonl", pool);
  write_file_atomic(dir / "system_prompt.txt", default_system_prompt());

  json cfg;
  cfg["schema_version"] = 1;
  cfg["articles"] = "articles.jsonl";
  cfg["gold"] = json::array({{{"kind", "departmental_proxy"}, {"path", "gold_proxy.csv"}},
                             {{"kind", "individual"}, {"path", "gold_individual.csv"}}});
  cfg["fewshot_pool"] = "fewshot_pool.jsonl";
  cfg["system_prompt"] = "system_prompt.txt";
  cfg["cache_dir"] = "cache";
  cfg["output_dir"] = "run";
  cfg["units"] = spec.units;
  cfg["sample_per_unit"] = spec.sample_per_unit;
  cfg["models"] = json::array();
  const std::array styles = {"mixed", "reasoning", "plain", "subscores-only"};
  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    cfg["models"].push_back({{"name", spec.models[m]},
                             {"base_url", "http://127.0.0.1:11434/v1"},
                             {"api_key_env", ""},
                             {"supports_system_role", m % 2 == 0},
                             {"request_timeout_s", 600},
                             {"mock_style", styles[m % styles.size()]},
                             {"mock_noise_sd", spec.noise_sd + 0.1 * static_cast<double>(m)}});
  }
  cfg["strategies"] = {"zero", "few"};
  cfg["iterations"] = spec.iterations;
  cfg["concurrency"] = 4;
  cfg["seed"] = spec.seed;
  cfg["bootstrap"] = {{"replicates", 1000}, {"alpha", 0.05}};
  cfg["fusion"] = {{"folds", 10},
                   {"de", {{"population", 40}, {"F", 0.8}, {"CR", 0.9}, {"generations", 200},
                           {"lower", 0.0}, {"upper", 1.0}}}};
  cfg["wata"] = {{"q_threshold", 0.05}, {"min_doc_freq", 5}, {"kwic_sample", 8},
                 {"kwic_window", 60}, {"kwic_terms", 5}};
  cfg["mock"] = {{"enabled", true},
                 {"noise_sd", spec.noise_sd},
                 {"multi_article_rate", 0.03},
                 {"latent_path", "latent.csv"}};
  cfg["write_prompts"] = spec.write_prompts;
  files.config = dir / "config.json";
  write_file_atomic(files.config, cfg.dump(2) + "\n");
  return files;
}

}  // namespace rqa
