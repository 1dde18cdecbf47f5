#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqa/corpus.hpp"
#include "rqa/fusion.hpp"
#include "rqa/llm_gateway.hpp"
#include "rqa/stats.hpp"
#include "rqa/wata.hpp"

namespace rqa {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.3.0";

struct GoldSource {
  GoldKind kind = GoldKind::departmental_proxy;
  std::filesystem::path path;
  /// Nine-point raw scores to be norm-referenced onto [1, 4].
  bool nine_point = false;
  std::map<int, double> unit_targets;
};

struct WataSettings {
  double q_threshold = 0.05;
  std::size_t min_doc_freq = 5;
  std::size_t kwic_sample = 10;
  std::size_t kwic_window = 60;
  std::size_t kwic_terms = 10;
};

struct MockConfig {
  bool enabled = false;
  double noise_sd = 0.5;
  double multi_article_rate = 0.0;
  std::optional<std::filesystem::path> latent_path;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::filesystem::path articles;
  std::vector<GoldSource> gold;
  std::filesystem::path fewshot_pool;
  std::filesystem::path system_prompt;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::vector<int> units = default_units();
  std::size_t sample_per_unit = kDefaultSamplePerUnit;
  std::vector<ModelConfig> models;
  std::vector<Strategy> strategies = {Strategy::zero, Strategy::few};
  int iterations = 5;
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::size_t bootstrap_replicates = kDefaultBootstrapReplicates;
  double alpha = kDefaultAlpha;
  int folds = kDefaultFolds;
  DeParams de;
  WataSettings wata;
  MockConfig mock;
  bool write_prompts = true;

  /// Checks invariants and that every referenced input exists.
  void validate() const;
};

/// Reads a JSON config; relative paths resolve against the config's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

enum class Stage { ingest, prompt, score, extract, analyze, fuse, wata, violin };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);
const std::vector<Stage>& all_stages();

struct RunReport {
  std::filesystem::path run_dir;
  bool ok = true;
  std::optional<Stage> failed_stage;
  std::string error;
};

/// Executes the requested stages in pipeline order. Each stage reads its
/// inputs from the run directory, so stages can be rerun independently. A
/// failing stage stops the run; earlier outputs stay and the manifest names
/// the failure point.
RunReport run(const ExperimentConfig& config, const std::vector<Stage>& stages);

/// Tasks for every article x model x strategy x iteration, in that order.
std::vector<CompletionTask> build_tasks(const ExperimentConfig& config, const ArticleSet& articles);

struct CorrelationRow {
  std::string uoa;
  ColumnId column;
  GoldKind gold_kind = GoldKind::departmental_proxy;
  CorrelationResult result;
};

std::string correlations_csv(const std::vector<CorrelationRow>& rows);

/// Fusion table: uoa,mean,median,best_single,rank_average,cv_mean,n.
std::string fusion_csv(const std::vector<FusionRow>& rows);

/// Fixed-width table with each row's maximum bracketed.
std::string fusion_summary(const std::vector<FusionRow>& rows, GoldKind kind);

}  // namespace rqa
