#include "rqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "rqa/extract.hpp"
#include "rqa/io.hpp"
#include "rqa/mock.hpp"
#include "rqa/promptgen.hpp"
#include "rqa/rng.hpp"
#include "rqa/violin.hpp"

namespace rqa {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty())
    throw ConfigError(fmt::format("config is missing '{}'", key));
  return it->get<std::string>();
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.name = required_string(j, "name");
  m.base_url = get_or<std::string>(j, "base_url", "");
  m.api_key_env = get_or<std::string>(j, "api_key_env", "");
  m.supports_system_role = get_or<bool>(j, "supports_system_role", true);
  if (j.contains("temperature") && !j["temperature"].is_null()) m.temperature = j["temperature"].get<double>();
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null())
    m.max_output_tokens = j["max_output_tokens"].get<int>();
  m.request_timeout_s = get_or<double>(j, "request_timeout_s", 300.0);
  m.mock_style = get_or<std::string>(j, "mock_style", "plain");
  if (j.contains("mock_noise_sd") && !j["mock_noise_sd"].is_null())
    m.mock_noise_sd = j["mock_noise_sd"].get<double>();
  return m;
}

json model_to_json(const ModelConfig& m) {
  json j;
  j["name"] = m.name;
  j["base_url"] = m.base_url;
  j["api_key_env"] = m.api_key_env;
  j["supports_system_role"] = m.supports_system_role;
  j["temperature"] = m.temperature ? json(*m.temperature) : json(nullptr);
  j["max_output_tokens"] = m.max_output_tokens ? json(*m.max_output_tokens) : json(nullptr);
  j["request_timeout_s"] = m.request_timeout_s;
  j["mock_style"] = m.mock_style;
  j["mock_noise_sd"] = m.mock_noise_sd ? json(*m.mock_noise_sd) : json(nullptr);
  return j;
}

json config_snapshot(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["articles"] = c.articles.generic_string();
  j["gold"] = json::array();
  for (const auto& g : c.gold) {
    json gj{{"kind", to_string(g.kind)}, {"path", g.path.generic_string()}, {"nine_point", g.nine_point}};
    json targets = json::object();
    for (const auto& [u, t] : g.unit_targets) targets[std::to_string(u)] = t;
    gj["unit_targets"] = targets;
    j["gold"].push_back(gj);
  }
  j["fewshot_pool"] = c.fewshot_pool.generic_string();
  j["system_prompt"] = c.system_prompt.generic_string();
  j["cache_dir"] = c.cache_dir.generic_string();
  j["output_dir"] = c.output_dir.generic_string();
  j["units"] = c.units;
  j["sample_per_unit"] = c.sample_per_unit;
  j["models"] = json::array();
  for (const auto& m : c.models) j["models"].push_back(model_to_json(m));
  j["strategies"] = json::array();
  for (auto s : c.strategies) j["strategies"].push_back(std::string(to_string(s)));
  j["iterations"] = c.iterations;
  j["concurrency"] = c.concurrency;
  j["seed"] = c.seed;
  j["bootstrap"] = {{"replicates", c.bootstrap_replicates}, {"alpha", c.alpha}};
  j["fusion"] = {{"folds", c.folds},
                 {"de",
                  {{"population", c.de.population},
                   {"F", c.de.mutation},
                   {"CR", c.de.crossover},
                   {"generations", c.de.generations},
                   {"lower", c.de.lower},
                   {"upper", c.de.upper}}}};
  j["wata"] = {{"q_threshold", c.wata.q_threshold},
               {"min_doc_freq", c.wata.min_doc_freq},
               {"kwic_sample", c.wata.kwic_sample},
               {"kwic_window", c.wata.kwic_window},
               {"kwic_terms", c.wata.kwic_terms}};
  j["mock"] = {{"enabled", c.mock.enabled},
               {"noise_sd", c.mock.noise_sd},
               {"multi_article_rate", c.mock.multi_article_rate},
               {"latent_path", c.mock.latent_path ? json(c.mock.latent_path->generic_string()) : json(nullptr)}};
  j["write_prompts"] = c.write_prompts;
  return j;
}

bool uses_few_shot(const ExperimentConfig& c) {
  return std::find(c.strategies.begin(), c.strategies.end(), Strategy::few) != c.strategies.end();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw ConfigError(fmt::format("unsupported config schema_version {}", schema_version));
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (concurrency < 1) throw ConfigError("concurrency must be at least 1");
  if (models.empty()) throw ConfigError("config lists no models");
  if (strategies.empty()) throw ConfigError("config lists no strategies");
  if (units.empty()) throw ConfigError("config lists no units of assessment");
  std::set<std::string> names;
  for (const auto& m : models) {
    try {
      m.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!names.insert(m.name).second) throw ConfigError(fmt::format("duplicate model '{}'", m.name));
    if (!mock.enabled && m.base_url.empty())
      throw ConfigError(fmt::format("model '{}' has no base_url", m.name));
  }
  auto must_exist = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(fmt::format("config is missing '{}'", what));
    if (!fs::exists(p)) throw ConfigError(fmt::format("{} '{}' does not exist", what, p.string()));
  };
  must_exist(articles, "articles");
  must_exist(system_prompt, "system_prompt");
  if (uses_few_shot(*this)) must_exist(fewshot_pool, "fewshot_pool");
  std::set<GoldKind> kinds;
  for (const auto& g : gold) {
    must_exist(g.path, "gold file");
    if (!kinds.insert(g.kind).second)
      throw ConfigError(fmt::format("gold kind '{}' listed twice", to_string(g.kind)));
  }
  if (mock.latent_path) must_exist(*mock.latent_path, "mock latent file");
  if (output_dir.empty()) throw ConfigError("config is missing 'output_dir'");
  if (bootstrap_replicates < 100) throw ConfigError("bootstrap replicates must be at least 100");
  if (folds < 2) throw ConfigError("fusion folds must be at least 2");
}

ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  const fs::path base = fs::absolute(path).parent_path();

  ExperimentConfig c;
  c.schema_version = get_or<int>(j, "schema_version", kConfigSchemaVersion);
  c.articles = resolve(base, required_string(j, "articles"));
  c.fewshot_pool = resolve(base, get_or<std::string>(j, "fewshot_pool", ""));
  if (get_or<std::string>(j, "fewshot_pool", "").empty()) c.fewshot_pool.clear();
  c.system_prompt = resolve(base, required_string(j, "system_prompt"));
  c.cache_dir = resolve(base, get_or<std::string>(j, "cache_dir", "cache"));
  c.output_dir = resolve(base, get_or<std::string>(j, "output_dir", "run"));
  c.units = get_or<std::vector<int>>(j, "units", default_units());
  c.sample_per_unit = get_or<std::size_t>(j, "sample_per_unit", kDefaultSamplePerUnit);

  for (const auto& g : j.value("gold", json::array())) {
    GoldSource src;
    try {
      src.kind = gold_kind_from_string(required_string(g, "kind"));
    } catch (const CorpusError& e) {
      throw ConfigError(e.what());
    }
    src.path = resolve(base, required_string(g, "path"));
    src.nine_point = get_or<bool>(g, "nine_point", false);
    for (const auto& [u, t] : g.value("unit_targets", json::object()).items())
      src.unit_targets[std::stoi(u)] = t.get<double>();
    if (src.nine_point && src.unit_targets.empty())
      throw ConfigError("nine-point gold needs 'unit_targets'");
    c.gold.push_back(std::move(src));
  }

  for (const auto& m : j.value("models", json::array())) c.models.push_back(model_from_json(m));
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : j["strategies"]) {
      try {
        c.strategies.push_back(strategy_from_string(s.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  c.iterations = get_or<int>(j, "iterations", 5);
  c.concurrency = get_or<std::size_t>(j, "concurrency", 4);
  if (!j.contains("seed") || !j["seed"].is_number_integer())
    throw ConfigError("config is missing an integer 'seed'");
  c.seed = j["seed"].get<std::uint64_t>();

  const json boot = j.value("bootstrap", json::object());
  c.bootstrap_replicates = get_or<std::size_t>(boot, "replicates", kDefaultBootstrapReplicates);
  c.alpha = get_or<double>(boot, "alpha", kDefaultAlpha);

  const json fusion = j.value("fusion", json::object());
  c.folds = get_or<int>(fusion, "folds", kDefaultFolds);
  const json de = fusion.value("de", json::object());
  c.de.population = get_or<std::size_t>(de, "population", c.de.population);
  c.de.mutation = get_or<double>(de, "F", c.de.mutation);
  c.de.crossover = get_or<double>(de, "CR", c.de.crossover);
  c.de.generations = get_or<std::size_t>(de, "generations", c.de.generations);
  c.de.lower = get_or<double>(de, "lower", c.de.lower);
  c.de.upper = get_or<double>(de, "upper", c.de.upper);

  const json w = j.value("wata", json::object());
  c.wata.q_threshold = get_or<double>(w, "q_threshold", c.wata.q_threshold);
  c.wata.min_doc_freq = get_or<std::size_t>(w, "min_doc_freq", c.wata.min_doc_freq);
  c.wata.kwic_sample = get_or<std::size_t>(w, "kwic_sample", c.wata.kwic_sample);
  c.wata.kwic_window = get_or<std::size_t>(w, "kwic_window", c.wata.kwic_window);
  c.wata.kwic_terms = get_or<std::size_t>(w, "kwic_terms", c.wata.kwic_terms);

  const json mock = j.value("mock", json::object());
  c.mock.enabled = get_or<bool>(mock, "enabled", false);
  c.mock.noise_sd = get_or<double>(mock, "noise_sd", c.mock.noise_sd);
  c.mock.multi_article_rate = get_or<double>(mock, "multi_article_rate", c.mock.multi_article_rate);
  if (auto lp = get_or<std::string>(mock, "latent_path", ""); !lp.empty())
    c.mock.latent_path = resolve(base, lp);
  c.write_prompts = get_or<bool>(j, "write_prompts", true);
  return c;
}

// ---------------------------------------------------------------------------
// Stage plumbing

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::prompt: return "prompt";
    case Stage::score: return "score";
    case Stage::extract: return "extract";
    case Stage::analyze: return "analyze";
    case Stage::fuse: return "fuse";
    case Stage::wata: return "wata";
    case Stage::violin: return "violin";
  }
  return "?";
}

Stage stage_from_string(std::string_view text) {
  for (Stage s : all_stages())
    if (to_string(s) == text) return s;
  throw std::invalid_argument(fmt::format("unknown stage '{}'", text));
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::ingest,  Stage::prompt, Stage::score,
                                            Stage::extract, Stage::analyze, Stage::fuse,
                                            Stage::wata,    Stage::violin};
  return stages;
}

namespace {

constexpr const char* kArticlesFile = "articles.jsonl";
constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kParsedFile = "parsed.jsonl";
constexpr const char* kManifestFile = "manifest.json";

std::string safe_name(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    if (!keep) c = '_';
  }
  return out;
}

fs::path gold_file(const fs::path& run_dir, GoldKind kind) {
  return run_dir / fmt::format("gold_{}.csv", to_string(kind));
}

fs::path require_input(const fs::path& p, Stage producer) {
  if (!fs::exists(p))
    throw IoError(fmt::format("missing '{}'; run the '{}' stage first", p.filename().string(),
                              to_string(producer)));
  return p;
}

/// Notes and counts a stage reports into the manifest.
struct StageLog {
  json counts = json::object();
  std::vector<std::string> notes;
};

class Pipeline {
 public:
  explicit Pipeline(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.output_dir) {}

  void run_stage(Stage stage, StageLog& log) {
    switch (stage) {
      case Stage::ingest: return ingest(log);
      case Stage::prompt: return prompt(log);
      case Stage::score: return score(log);
      case Stage::extract: return extract(log);
      case Stage::analyze: return analyze(log);
      case Stage::fuse: return fuse(log);
      case Stage::wata: return wata(log);
      case Stage::violin: return violin(log);
    }
  }

  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(cfg_.seed, stage); }

 private:
  const ExperimentConfig& cfg_;
  fs::path dir_;
  std::optional<ArticleSet> articles_;
  std::optional<std::vector<ParsedRecord>> parsed_;

  const ArticleSet& articles() {
    if (!articles_) {
      articles_ = load_articles(require_input(dir_ / kArticlesFile, Stage::ingest), cfg_.units);
      articles_->eligibility_screened = true;
    }
    return *articles_;
  }

  std::map<std::string, int> unit_of() {
    std::map<std::string, int> out;
    for (const auto& a : articles().articles) out[a.id] = a.uoa;
    return out;
  }

  std::vector<GoldStandard> golds() {
    std::vector<GoldStandard> out;
    for (const auto& src : cfg_.gold)
      out.push_back(load_gold(require_input(gold_file(dir_, src.kind), Stage::ingest), src.kind, articles()));
    return out;
  }

  const std::vector<ParsedRecord>& parsed() {
    if (!parsed_) {
      parsed_.emplace();
      for (const auto& line : split_lines(read_text_file(require_input(dir_ / kParsedFile, Stage::extract))))
        if (!line.empty()) parsed_->push_back(parsed_from_jsonl(line));
    }
    return *parsed_;
  }

  std::vector<RawRecord> records() {
    std::vector<RawRecord> out;
    for (const auto& line : split_lines(read_text_file(require_input(dir_ / kRecordsFile, Stage::score))))
      if (!line.empty()) out.push_back(record_from_jsonl(line));
    return out;
  }

  void ingest(StageLog& log) {
    const ArticleSet loaded = load_articles(cfg_.articles, cfg_.units);
    if (loaded.empty()) throw CorpusError(fmt::format("'{}' contains no articles", cfg_.articles.string()));
    const ArticleSet eligible = filter_eligible(loaded);
    ArticleSet sampled = sample_per_uoa(eligible, cfg_.sample_per_unit, stage_seed("sample"));
    if (sampled.empty()) throw CorpusError("no article survived eligibility screening");
    write_file_atomic(dir_ / kArticlesFile, serialize_articles(sampled));
    log.counts["loaded"] = loaded.size();
    log.counts["eligible"] = eligible.size();
    log.counts["sampled"] = sampled.size();

    std::set<std::string> keep;
    for (const auto& a : sampled.articles) keep.insert(a.id);
    for (const auto& src : cfg_.gold) {
      GoldStandard gold;
      if (src.kind == GoldKind::departmental_proxy) {
        std::vector<std::string> warnings;
        gold = build_proxy_gold(loaded, load_gold_rows(src.path), &warnings);
        if (!warnings.empty())
          log.notes.push_back(fmt::format("{} loaded articles have no departmental submission", warnings.size()));
      } else if (src.nine_point) {
        std::map<std::string, double> raw;
        for (const auto& [id, values] : load_gold_rows(src.path)) {
          if (values.size() != 1)
            throw CorpusError(fmt::format("{}: article '{}' listed {} times", src.path.string(), id, values.size()));
          raw[id] = values[0];
        }
        gold = norm_reference(loaded, raw, src.unit_targets);
      } else {
        gold = load_gold(src.path, src.kind, loaded);
      }
      std::erase_if(gold.scores, [&](const auto& kv) { return !keep.contains(kv.first); });
      write_file_atomic(gold_file(dir_, src.kind), serialize_gold(gold));
      log.counts[fmt::format("gold_{}", to_string(src.kind))] = gold.scores.size();
    }
  }

  void prompt(StageLog& log) {
    const auto tasks = build_tasks(cfg_, articles());
    log.counts["tasks"] = tasks.size();
    if (!cfg_.write_prompts) return;
    write_file_atomic(dir_ / "prompts" / "system.txt", SystemPrompt::load(cfg_.system_prompt).text());
    // One dump per (article, strategy, iteration); prompts do not vary by model.
    std::set<std::tuple<std::string, Strategy, int>> written;
    std::string index = "article_id,strategy,iteration,file,bytes\n";
    const std::string first_model = cfg_.models.front().name;
    for (const auto& t : tasks) {
      if (t.key.model != first_model) continue;
      if (!written.emplace(t.key.article_id, t.key.strategy, t.key.iteration).second) continue;
      const std::string& user = t.messages.back().content;
      const fs::path rel = fs::path("prompts") / std::string(to_string(t.key.strategy)) /
                           fmt::format("{}.iter{}.txt", safe_name(t.key.article_id), t.key.iteration);
      write_file_atomic(dir_ / rel, build_user_prompt(t));
      index += csv_row({t.key.article_id, std::string(to_string(t.key.strategy)),
                        std::to_string(t.key.iteration), rel.generic_string(), std::to_string(user.size())});
    }
    write_file_atomic(dir_ / "prompts" / "index.csv", index);
    log.counts["prompt_files"] = written.size();
  }

  // User-prompt bytes of a task, with any folded system text removed.
  std::string build_user_prompt(const CompletionTask& t) {
    const std::string& content = t.messages.back().content;
    if (t.messages.size() == 2) return content;
    const std::string& sys = SystemPrompt::load(cfg_.system_prompt).text();
    return content.substr(std::min(content.size(), sys.size() + 1));
  }

  void score(StageLog& log) {
    const auto tasks = build_tasks(cfg_, articles());
    std::map<std::string, ModelConfig> configs;
    for (const auto& m : cfg_.models) configs[m.name] = m;

    std::unique_ptr<ChatBackend> backend;
    HttplibTransport transport;
    if (cfg_.mock.enabled) {
      MockSettings settings;
      settings.seed = stage_seed("mock");
      settings.noise_sd = cfg_.mock.noise_sd;
      settings.multi_article_rate = cfg_.mock.multi_article_rate;
      if (cfg_.mock.latent_path)
        for (const auto& [id, values] : load_gold_rows(*cfg_.mock.latent_path)) settings.latent[id] = values.front();
      backend = std::make_unique<MockBackend>(std::move(settings));
    } else {
      backend = std::make_unique<HttpBackend>(transport);
    }

    const ResponseCache cache(cfg_.cache_dir);
    BatchStats stats;
    const auto records = run_batch(tasks, configs, cfg_.concurrency, &cache, *backend, &stats);
    std::string out;
    std::size_t ok = 0;
    for (const auto& r : records) {
      out += record_to_jsonl(r);
      out.push_back('\n');
      if (r.status == RecordStatus::ok) ++ok;
    }
    write_file_atomic(dir_ / kRecordsFile, out);
    log.counts["tasks"] = tasks.size();
    log.counts["ok"] = ok;
    log.counts["failed"] = records.size() - ok;
    // Cache traffic depends on what earlier runs left behind, so it goes to
    // the console rather than the manifest.
    std::cerr << fmt::format("score: {} backend calls, {} cache hits, max {} in flight\n",
                             stats.backend_calls, stats.cache_hits, stats.max_in_flight);
  }

  void extract(StageLog& log) {
    const auto raw = records();
    std::string out;
    std::size_t parsed_count = 0, no_score = 0, multi = 0, fallback = 0;
    parsed_.reset();
    for (const auto& r : raw) {
      ParsedRecord p;
      p.key = r.key;
      p.status = r.status;
      if (r.status == RecordStatus::ok) {
        const Extraction e = extract_report(r.text);
        p.parsed = e.parsed;
        p.effective = e.effective;
        ++parsed_count;
        if (p.parsed.flags.has(ScoreFlag::no_score_found)) ++no_score;
        if (p.parsed.flags.has(ScoreFlag::multi_article)) ++multi;
        if (p.parsed.flags.has(ScoreFlag::subscore_fallback)) ++fallback;
      }
      out += parsed_to_jsonl(p);
      out.push_back('\n');
    }
    write_file_atomic(dir_ / kParsedFile, out);
    log.counts["parsed"] = parsed_count;
    log.counts["no_score_found"] = no_score;
    log.counts["multi_article"] = multi;
    log.counts["subscore_fallback"] = fallback;
  }

  ScoreMatrix matrix() { return ScoreMatrix::from_records(parsed()); }

  static std::map<std::string, double> column_map(const ScoreMatrix& m, std::size_t c,
                                                  const std::set<std::string>* only = nullptr) {
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      if (!m.cells[r][c]) continue;
      if (only && !only->contains(m.rows[r])) continue;
      out[m.rows[r]] = m.cells[r][c]->mean;
    }
    return out;
  }

  void analyze(StageLog& log) {
    const ScoreMatrix m = matrix();
    const auto units = unit_of();

    std::string matrix_csv = "article_id,uoa";
    for (const auto& col : m.columns) matrix_csv += fmt::format(",{0}_mean,{0}_k", csv_field(col.label()));
    matrix_csv += '\n';
    std::size_t cells = 0;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      auto u = units.find(m.rows[r]);
      std::vector<std::string> fields = {m.rows[r], u == units.end() ? "" : std::to_string(u->second)};
      for (const auto& cell : m.cells[r]) {
        fields.push_back(cell ? format_number(cell->mean) : "");
        fields.push_back(cell ? std::to_string(cell->effective_k) : "0");
        if (cell) ++cells;
      }
      matrix_csv += csv_row(fields);
    }
    write_file_atomic(dir_ / "matrix.csv", matrix_csv);
    log.counts["matrix_rows"] = m.rows.size();
    log.counts["matrix_cells"] = cells;

    std::map<int, std::set<std::string>> members;
    for (const auto& [id, u] : units) members[u].insert(id);

    std::vector<CorrelationRow> rows;
    std::string summary = "gold_kind,model,strategy,units,mean_rho,ci_low,ci_high\n";
    std::string signs = "gold_kind,comparison,k,n,p_value\n";
    std::size_t skipped = 0;
    const std::uint64_t boot_seed = stage_seed("bootstrap");
    for (const auto& gold : golds()) {
      // rho[column][unit]
      std::map<std::size_t, std::map<int, double>> rho;
      for (const auto& [u, ids] : members) {
        for (std::size_t c = 0; c < m.columns.size(); ++c) {
          const Paired p = pair_up(column_map(m, c, &ids), gold.scores);
          const std::string tag = fmt::format("{}|{}|{}", to_string(gold.kind), u, m.columns[c].label());
          try {
            CorrelationRow row{std::to_string(u), m.columns[c], gold.kind,
                               correlate(p.x, p.y, cfg_.bootstrap_replicates, cfg_.alpha,
                                         derive_seed(boot_seed, tag))};
            rho[c][u] = row.result.rho;
            rows.push_back(std::move(row));
          } catch (const StatsError& e) {
            ++skipped;
            log.notes.push_back(fmt::format("correlation {} skipped: {}", tag, e.what()));
          }
        }
      }
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        std::vector<double> values;
        for (const auto& [u, r] : rho[c]) values.push_back(r);
        if (values.size() < 2) continue;
        const UnitAggregate agg = aggregate_across_units(values);
        summary += csv_row({to_string(gold.kind), m.columns[c].model,
                            std::string(to_string(m.columns[c].strategy)), std::to_string(values.size()),
                            format_number(agg.mean), format_number(agg.ci_low), format_number(agg.ci_high)});
      }
      // Few-shot against zero-shot, per model and pooled over models.
      std::vector<double> all_few, all_zero;
      for (const auto& model : cfg_.models) {
        const ColumnId zero{model.name, Strategy::zero}, few{model.name, Strategy::few};
        auto zc = std::find(m.columns.begin(), m.columns.end(), zero);
        auto fc = std::find(m.columns.begin(), m.columns.end(), few);
        if (zc == m.columns.end() || fc == m.columns.end()) continue;
        const auto& zr = rho[static_cast<std::size_t>(zc - m.columns.begin())];
        const auto& fr = rho[static_cast<std::size_t>(fc - m.columns.begin())];
        std::vector<double> a, b;
        for (const auto& [u, r] : fr) {
          auto z = zr.find(u);
          if (z == zr.end()) continue;
          a.push_back(r);
          b.push_back(z->second);
        }
        all_few.insert(all_few.end(), a.begin(), a.end());
        all_zero.insert(all_zero.end(), b.begin(), b.end());
        const SignTestResult st = sign_test(a, b);
        signs += csv_row({to_string(gold.kind), fmt::format("{} few>zero", model.name), std::to_string(st.k),
                          std::to_string(st.n), format_number(st.p_value)});
      }
      if (!all_few.empty()) {
        const SignTestResult st = sign_test(all_few, all_zero);
        signs += csv_row({to_string(gold.kind), "all models few>zero", std::to_string(st.k),
                          std::to_string(st.n), format_number(st.p_value)});
      }
    }
    write_file_atomic(dir_ / "correlations.csv", correlations_csv(rows));
    write_file_atomic(dir_ / "correlation_summary.csv", summary);
    write_file_atomic(dir_ / "sign_tests.csv", signs);
    log.counts["correlations"] = rows.size();
    log.counts["correlations_skipped"] = skipped;
  }

  void fuse(StageLog& log) {
    const ScoreMatrix m = matrix();
    const auto units = unit_of();
    std::map<int, std::vector<std::string>> members;
    for (const auto& [id, u] : units) members[u].push_back(id);
    const std::uint64_t fold_seed = stage_seed("fusion");

    for (const auto& gold : golds()) {
      std::vector<FusionRow> rows;
      json weights = json::object();
      weights["columns"] = json::array();
      for (const auto& c : m.columns) weights["columns"].push_back(c.label());
      weights["rows"] = json::object();

      auto add_row = [&](const std::string& label, const ScoreMatrix& sub, const GoldStandard& g) {
        try {
          FusionRow row = fusion_row(label, sub, g, units, cfg_.folds,
                                     derive_seed(fold_seed, fmt::format("{}|{}", to_string(gold.kind), label)),
                                     cfg_.de);
          json folds = json::array();
          for (std::size_t f = 0; f < row.cv.fold_weights.size(); ++f)
            folds.push_back({{"fold", f + 1},
                             {"rho", row.cv.fold_rhos[f]},
                             {"train_objective", row.cv.fold_weights[f].objective},
                             {"weights", row.cv.fold_weights[f].w}});
          weights["rows"][label] = {{"best_single_column", row.best_column}, {"folds", folds}};
          rows.push_back(std::move(row));
        } catch (const std::exception& e) {
          log.notes.push_back(fmt::format("fusion row {} ({}) skipped: {}", label, to_string(gold.kind), e.what()));
          FusionRow na;
          na.label = label;
          na.mean = na.median = na.best_single = na.rank_average = na.cv_mean = std::nan("");
          rows.push_back(std::move(na));
        }
      };

      for (const auto& [u, ids] : members) add_row(std::to_string(u), m.select_rows(ids), gold);
      if (members.size() > 1) {
        auto [pooled, pooled_gold] = unit_rank_normalise(m, gold, units);
        add_row("All", pooled, pooled_gold);
      }
      const std::string stem = fmt::format("fusion_{}", to_string(gold.kind));
      write_file_atomic(dir_ / (stem + ".csv"), fusion_csv(rows));
      write_file_atomic(dir_ / (stem + "_weights.json"), weights.dump(2) + "\n");
      write_file_atomic(dir_ / (stem + "_summary.txt"), fusion_summary(rows, gold.kind));
      log.counts[stem + "_rows"] = rows.size();
    }
  }

  void wata(StageLog& log) {
    const auto raw = records();
    std::map<std::string, std::pair<std::vector<RawDoc>, std::vector<RawDoc>>> by_model;
    for (const auto& r : raw) {
      if (r.status != RecordStatus::ok) continue;
      RawDoc doc{fmt::format("{}#{}", r.key.article_id, r.key.iteration), r.text};
      auto& [zero, few] = by_model[r.key.model];
      (r.key.strategy == Strategy::zero ? zero : few).push_back(std::move(doc));
    }
    const std::uint64_t seed = stage_seed("kwic");
    std::size_t compared = 0;
    for (const auto& [model, corpora] : by_model) {
      const auto& [zero, few] = corpora;
      if (zero.empty() || few.empty()) continue;
      std::vector<TokenizedDoc> a, b;
      for (const auto& d : zero) a.push_back(tokenize(d.text, d.id));
      for (const auto& d : few) b.push_back(tokenize(d.text, d.id));
      const auto stats = compare(a, b, {cfg_.wata.q_threshold, cfg_.wata.min_doc_freq});
      const std::string stem = safe_name(model);
      write_file_atomic(dir_ / fmt::format("wata_{}.csv", stem), term_stats_csv(stats, "zero", "few"));

      std::string report = fmt::format(
          "Keyword-in-context samples for {} (zero-shot vs few-shot reports)\n"
          "Terms: top {} by chi-square among q <= {}; up to {} occurrences each, {} bytes of context\n",
          model, cfg_.wata.kwic_terms, cfg_.wata.q_threshold, cfg_.wata.kwic_sample, cfg_.wata.kwic_window);
      for (std::size_t i = 0; i < stats.size() && i < cfg_.wata.kwic_terms; ++i) {
        const TermStat& s = stats[i];
        const auto& corpus = s.direction == Direction::a ? zero : few;
        report += fmt::format("\n== {} ({}: {:.1f}% zero-shot vs {:.1f}% few-shot, q={:.3g})\n", s.term,
                              s.direction == Direction::a ? "zero" : "few", 100.0 * s.rate_a(),
                              100.0 * s.rate_b(), s.q);
        for (const auto& line : kwic(s.term, corpus, cfg_.wata.kwic_sample, cfg_.wata.kwic_window,
                                     derive_seed(seed, model)))
          report += fmt::format("{:>16} | {:>60}[{}]{}\n", line.doc_id, line.left, line.term, line.right);
      }
      write_file_atomic(dir_ / fmt::format("kwic_{}.txt", stem), report);
      log.counts[fmt::format("significant_terms_{}", stem)] = stats.size();
      ++compared;
    }
    if (compared == 0) log.notes.push_back("no model has both zero-shot and few-shot reports");
  }

  void violin(StageLog& log) {
    const ScoreMatrix m = matrix();
    std::vector<std::pair<std::string, std::map<std::string, double>>> series;
    {
      const FusedVector fused = mean_fusion(m);
      std::map<std::string, double> values;
      for (std::size_t r = 0; r < m.rows.size(); ++r)
        if (fused[r]) values[m.rows[r]] = *fused[r];
      series.emplace_back("mean_fusion", std::move(values));
    }
    for (std::size_t c = 0; c < m.columns.size(); ++c)
      series.emplace_back(safe_name(m.columns[c].model + "_" + std::string(to_string(m.columns[c].strategy))),
                          column_map(m, c));

    std::size_t emitted = 0;
    for (const auto& gold : golds()) {
      for (const auto& [label, values] : series) {
        try {
          const ViolinSummary s =
              violin_summary(values, gold, fmt::format("{} vs {} gold", label, to_string(gold.kind)));
          const std::string stem = fmt::format("violin_{}_{}", to_string(gold.kind), label);
          write_file_atomic(dir_ / (stem + ".csv"), violin_csv(s));
          emit_violin_svg(s, dir_ / (stem + ".svg"));
          log.counts[stem + "_discarded_non_integer"] = s.discarded_non_integer;
          ++emitted;
        } catch (const ViolinError& e) {
          log.notes.push_back(fmt::format("violin {} vs {} skipped: {}", label, to_string(gold.kind), e.what()));
          break;
        }
      }
    }
    log.counts["violins"] = emitted;
  }
};

}  // namespace

std::vector<CompletionTask> build_tasks(const ExperimentConfig& cfg, const ArticleSet& articles) {
  const SystemPrompt system = SystemPrompt::load(cfg.system_prompt);
  std::optional<FewShotPool> pool;
  if (uses_few_shot(cfg)) pool = load_fewshot_pool(cfg.fewshot_pool, articles, cfg.units);
  const std::uint64_t fewshot_seed = derive_seed(cfg.seed, "fewshot");

  std::vector<CompletionTask> tasks;
  tasks.reserve(articles.size() * cfg.models.size() * cfg.strategies.size() *
                static_cast<std::size_t>(cfg.iterations));
  for (const auto& a : articles.articles) {
    const std::string zero = build_zero_shot_user(a);
    for (const auto& model : cfg.models) {
      for (Strategy s : cfg.strategies) {
        for (int it = 1; it <= cfg.iterations; ++it) {
          // Few-shot examples are redrawn for every iteration.
          const std::string user =
              s == Strategy::zero
                  ? zero
                  : build_few_shot_user(a, select_fewshot(a, *pool, fewshot_seed, static_cast<std::uint64_t>(it)));
          tasks.push_back({{a.id, model.name, s, it}, compose_messages(system, user, model.supports_system_role)});
        }
      }
    }
  }
  return tasks;
}

std::string correlations_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "uoa,model,strategy,gold_kind,n,rho,ci_low,ci_high\n";
  for (const auto& r : rows)
    out += csv_row({r.uoa, r.column.model, std::string(to_string(r.column.strategy)), to_string(r.gold_kind),
                    std::to_string(r.result.n), format_number(r.result.rho), format_number(r.result.ci_low),
                    format_number(r.result.ci_high)});
  return out;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? "NA" : format_number(v); }

}  // namespace

std::string fusion_csv(const std::vector<FusionRow>& rows) {
  std::string out =
      "# All row: articles pooled across units after within-unit rank normalisation\n"
      "uoa,mean,median,best_single,rank_average,cv_mean,n\n";
  for (const auto& r : rows)
    out += csv_row({r.label, cell(r.mean), cell(r.median), cell(r.best_single), cell(r.rank_average),
                    cell(r.cv_mean), std::to_string(r.n)});
  return out;
}

std::string fusion_summary(const std::vector<FusionRow>& rows, GoldKind kind) {
  std::string out = fmt::format(
      "Fused Spearman correlations against the {} gold standard ([x] marks the row maximum)\n\n"
      "{:<6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}\n",
      to_string(kind), "UoA", "Mean", "Median", "Best single", "Rank avg", "10-fold CV", "n");
  for (const auto& r : rows) {
    const std::array values = {r.mean, r.median, r.best_single, r.rank_average, r.cv_mean};
    double best = -std::numeric_limits<double>::infinity();
    for (double v : values)
      if (!std::isnan(v)) best = std::max(best, v);
    out += fmt::format("{:<6}", r.label);
    for (double v : values) {
      const std::string text = std::isnan(v) ? "NA" : format_number(v, 3);
      out += fmt::format(" {:>12}", v == best ? "[" + text + "]" : text);
    }
    out += fmt::format(" {:>6}\n", r.n);
  }
  return out;
}

RunReport run(const ExperimentConfig& config, const std::vector<Stage>& stages) {
  config.validate();
  RunReport report;
  report.run_dir = config.output_dir;
  fs::create_directories(config.output_dir);

  const fs::path manifest_path = config.output_dir / kManifestFile;
  json manifest = json::object();
  if (fs::exists(manifest_path)) {
    try {
      manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  Pipeline pipeline(config);
  manifest["tool"] = "rqa";
  manifest["version"] = std::string(kToolVersion);
  manifest["config"] = config_snapshot(config);
  json seeds = {{"master", config.seed}};
  for (const char* s : {"sample", "fewshot", "mock", "bootstrap", "fusion", "kwic"})
    seeds[s] = pipeline.stage_seed(s);
  manifest["seeds"] = seeds;
  if (!manifest.contains("stages")) manifest["stages"] = json::object();
  manifest["failure"] = nullptr;

  std::vector<Stage> ordered;
  for (Stage s : all_stages())
    if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);

  for (Stage s : ordered) {
    StageLog log;
    try {
      pipeline.run_stage(s, log);
      manifest["stages"][std::string(to_string(s))] = {
          {"status", "ok"}, {"counts", log.counts}, {"notes", log.notes}};
    } catch (const std::exception& e) {
      report.ok = false;
      report.failed_stage = s;
      report.error = e.what();
      manifest["stages"][std::string(to_string(s))] = {
          {"status", "failed"}, {"counts", log.counts}, {"notes", log.notes}, {"error", e.what()}};
      manifest["failure"] = {{"stage", std::string(to_string(s))}, {"error", e.what()}};
      break;
    }
  }
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return report;
}

}  // namespace rqa
