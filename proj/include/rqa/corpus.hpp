#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rqa {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Article {
  std::string id;
  int uoa = 0;
  std::optional<std::string> doi;
  std::string title;
  std::string abstract;

  bool operator==(const Article&) const = default;
};

/// An ordered collection of articles with unique ids.
///
/// `eligibility_screened` records that the eligibility screen has already
/// been applied; the decile cut is relative to its input, so screening a
/// second time is a no-op instead of trimming another tenth.
struct ArticleSet {
  std::vector<Article> articles;
  bool eligibility_screened = false;

  std::size_t size() const { return articles.size(); }
  bool empty() const { return articles.empty(); }
  const Article* find(const std::string& id) const;
};

enum class GoldKind { departmental_proxy, individual };

std::string to_string(GoldKind kind);
GoldKind gold_kind_from_string(const std::string& text);

struct GoldStandard {
  GoldKind kind = GoldKind::departmental_proxy;
  std::map<std::string, double> scores;
};

struct ExemplarArticle {
  Article article;
  int star = 0;
};

inline constexpr int kStarLevels = 4;
inline constexpr int kExemplarsPerCell = 2;

/// Two exemplars for each star level (1..4) of each unit of assessment.
struct FewShotPool {
  using Cell = std::array<ExemplarArticle, kExemplarsPerCell>;
  using UnitCells = std::array<Cell, kStarLevels>;
  std::map<int, UnitCells> units;

  const Cell& cell(int uoa, int star) const;
  std::size_t exemplar_count() const { return units.size() * kStarLevels * kExemplarsPerCell; }
};

/// Units of assessment accepted when no explicit list is configured.
std::vector<int> default_units();

ArticleSet load_articles(const std::filesystem::path& path,
                         const std::vector<int>& units = default_units());

/// Parses JSONL article records; `source` names the origin in error messages.
ArticleSet parse_articles(const std::string& text, const std::string& source,
                          const std::vector<int>& units = default_units());

std::string serialize_articles(const ArticleSet& set);

/// Drops articles without a DOI or abstract, then per unit drops abstracts
/// strictly shorter than the length at the 10% rank (ties retained).
ArticleSet filter_eligible(const ArticleSet& set);

/// Uniform seeded sample of min(n, available) articles per unit, keeping
/// input order.
ArticleSet sample_per_uoa(const ArticleSet& set, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kDefaultSamplePerUnit = 500;

/// Gold score per article = mean of the departmental means of every
/// submission that included it. Articles with no submission are skipped and
/// reported through `warnings`.
GoldStandard build_proxy_gold(const ArticleSet& set,
                              const std::map<std::string, std::vector<double>>& submissions,
                              std::vector<std::string>* warnings = nullptr);

/// Maps nine-point scores onto [1, 4] with s' = 1 + (s - 1) * 3/8, shifts each
/// unit so its mean equals the target, and clamps to [1, 4].
GoldStandard norm_reference(const ArticleSet& set, const std::map<std::string, double>& raw,
                            const std::map<int, double>& unit_targets);

/// Reads a gold CSV (`article_id,score`). Repeated ids are kept as separate
/// entries so departmental submissions can be averaged.
std::map<std::string, std::vector<double>> load_gold_rows(const std::filesystem::path& path);

/// Reads a gold CSV holding one score per article on [1, 4].
GoldStandard load_gold(const std::filesystem::path& path, GoldKind kind, const ArticleSet& set);

std::string serialize_gold(const GoldStandard& gold);

FewShotPool load_fewshot_pool(const std::filesystem::path& path, const ArticleSet& eval_set,
                              const std::vector<int>& units = default_units());

FewShotPool parse_fewshot_pool(const std::string& text, const std::string& source,
                               const ArticleSet& eval_set,
                               const std::vector<int>& units = default_units());

}  // namespace rqa
