#include "rqa/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "rqa/io.hpp"
#include "rqa/rng.hpp"

namespace rqa {

using nlohmann::json;

namespace {

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

Article article_from_json(const json& rec, const std::vector<int>& units) {
  if (!rec.is_object()) throw CorpusError("record is not a JSON object");
  auto required_string = [&](const char* key) -> std::string {
    auto it = rec.find(key);
    if (it == rec.end() || !it->is_string())
      throw CorpusError(fmt::format("missing or non-string '{}'", key));
    return it->get<std::string>();
  };

  Article a;
  a.id = required_string("id");
  if (a.id.empty()) throw CorpusError("empty 'id'");

  auto uoa = rec.find("uoa");
  if (uoa == rec.end() || !uoa->is_number_integer())
    throw CorpusError("missing or non-integer 'uoa'");
  a.uoa = uoa->get<int>();
  if (std::find(units.begin(), units.end(), a.uoa) == units.end())
    throw CorpusError(fmt::format("uoa {} is not a configured unit", a.uoa));

  if (auto doi = rec.find("doi"); doi != rec.end() && !doi->is_null()) {
    if (!doi->is_string()) throw CorpusError("'doi' must be a string or null");
    a.doi = doi->get<std::string>();
  }

  a.title = required_string("title");
  if (a.title.empty()) throw CorpusError("empty 'title'");

  if (auto abs = rec.find("abstract"); abs != rec.end() && !abs->is_null()) {
    if (!abs->is_string()) throw CorpusError("'abstract' must be a string or null");
    a.abstract = abs->get<std::string>();
  }
  return a;
}

json article_to_json(const Article& a) {
  json j;
  j["id"] = a.id;
  j["uoa"] = a.uoa;
  j["doi"] = a.doi ? json(*a.doi) : json(nullptr);
  j["title"] = a.title;
  j["abstract"] = a.abstract;
  return j;
}

}  // namespace

const Article* ArticleSet::find(const std::string& id) const {
  for (const auto& a : articles)
    if (a.id == id) return &a;
  return nullptr;
}

std::string to_string(GoldKind kind) {
  return kind == GoldKind::departmental_proxy ? "departmental_proxy" : "individual";
}

GoldKind gold_kind_from_string(const std::string& text) {
  if (text == "departmental_proxy") return GoldKind::departmental_proxy;
  if (text == "individual") return GoldKind::individual;
  throw CorpusError(fmt::format("unknown gold kind '{}'", text));
}

const FewShotPool::Cell& FewShotPool::cell(int uoa, int star) const {
  auto it = units.find(uoa);
  if (it == units.end()) throw CorpusError(fmt::format("few-shot pool has no uoa {}", uoa));
  if (star < 1 || star > kStarLevels) throw CorpusError(fmt::format("invalid star level {}", star));
  return it->second[static_cast<std::size_t>(star - 1)];
}

std::vector<int> default_units() { return {1, 2, 3, 4, 5, 6}; }

ArticleSet parse_articles(const std::string& text, const std::string& source,
                          const std::vector<int>& units) {
  ArticleSet set;
  std::unordered_map<std::string, std::size_t> first_line;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (is_blank(lines[i])) continue;
    Article a;
    try {
      a = article_from_json(json::parse(lines[i]), units);
    } catch (const json::exception& e) {
      throw CorpusError(fmt::format("{}:{}: malformed record: {}", source, lineno, e.what()));
    } catch (const CorpusError& e) {
      throw CorpusError(fmt::format("{}:{}: malformed record: {}", source, lineno, e.what()));
    }
    auto [it, inserted] = first_line.emplace(a.id, lineno);
    if (!inserted)
      throw CorpusError(fmt::format("{}: duplicate id '{}' on lines {} and {}", source, a.id,
                                    it->second, lineno));
    set.articles.push_back(std::move(a));
  }
  return set;
}

ArticleSet load_articles(const std::filesystem::path& path, const std::vector<int>& units) {
  return parse_articles(read_text_file(path), path.string(), units);
}

std::string serialize_articles(const ArticleSet& set) {
  std::string out;
  for (const auto& a : set.articles) {
    out += article_to_json(a).dump();
    out.push_back('\n');
  }
  return out;
}

ArticleSet filter_eligible(const ArticleSet& set) {
  if (set.eligibility_screened) return set;

  std::map<int, std::vector<const Article*>> by_unit;
  for (const auto& a : set.articles) {
    if (!a.doi || a.doi->empty() || a.abstract.empty()) continue;
    by_unit[a.uoa].push_back(&a);
  }

  // Per unit, the shortest tenth (floor) is cut at the length of the first
  // retained rank; anything tied with that length stays.
  std::map<int, std::size_t> min_length;
  for (const auto& [uoa, members] : by_unit) {
    std::vector<std::size_t> lengths;
    lengths.reserve(members.size());
    for (const Article* a : members) lengths.push_back(a->abstract.size());
    std::sort(lengths.begin(), lengths.end());
    const std::size_t cut = lengths.size() / 10;
    min_length[uoa] = cut == 0 ? 0 : lengths[cut];
  }

  ArticleSet out;
  out.eligibility_screened = true;
  for (const auto& a : set.articles) {
    if (!a.doi || a.doi->empty() || a.abstract.empty()) continue;
    if (a.abstract.size() < min_length[a.uoa]) continue;
    out.articles.push_back(a);
  }
  return out;
}

ArticleSet sample_per_uoa(const ArticleSet& set, std::size_t n, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_unit;
  for (std::size_t i = 0; i < set.articles.size(); ++i) by_unit[set.articles[i].uoa].push_back(i);

  std::vector<std::size_t> keep;
  for (auto& [uoa, idx] : by_unit) {
    if (idx.size() > n) {
      Rng rng = make_rng(seed, "sample", static_cast<std::uint64_t>(uoa));
      // Partial Fisher-Yates: the first n slots become the sample.
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + uniform_index(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(n);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());

  ArticleSet out;
  out.eligibility_screened = set.eligibility_screened;
  out.articles.reserve(keep.size());
  for (std::size_t i : keep) out.articles.push_back(set.articles[i]);
  return out;
}

GoldStandard build_proxy_gold(const ArticleSet& set,
                              const std::map<std::string, std::vector<double>>& submissions,
                              std::vector<std::string>* warnings) {
  GoldStandard gold;
  gold.kind = GoldKind::departmental_proxy;
  for (const auto& [id, means] : submissions) {
    if (!set.find(id))
      throw CorpusError(fmt::format("submission lists unknown article '{}'", id));
    if (means.empty())
      throw CorpusError(fmt::format("article '{}' has an empty submission score list", id));
    double sum = 0.0;
    for (double m : means) {
      if (!(m >= 1.0 && m <= 4.0))
        throw CorpusError(fmt::format("article '{}' has departmental mean {} outside [1, 4]", id, m));
      sum += m;
    }
    gold.scores[id] = sum / static_cast<double>(means.size());
  }
  for (const auto& a : set.articles) {
    if (!submissions.contains(a.id) && warnings)
      warnings->push_back(fmt::format("article '{}' has no departmental submission; excluded from gold", a.id));
  }
  return gold;
}

GoldStandard norm_reference(const ArticleSet& set, const std::map<std::string, double>& raw,
                            const std::map<int, double>& unit_targets) {
  for (const auto& [uoa, target] : unit_targets) {
    if (!(target >= 1.0 && target <= 4.0))
      throw CorpusError(fmt::format("target mean {} for uoa {} is outside [1, 4]", target, uoa));
  }

  std::map<int, std::vector<std::pair<std::string, double>>> by_unit;
  for (const auto& [id, score] : raw) {
    const Article* a = set.find(id);
    if (!a) throw CorpusError(fmt::format("gold score for unknown article '{}'", id));
    if (!(score >= 1.0 && score <= 9.0))
      throw CorpusError(fmt::format("nine-point score {} for '{}' is outside [1, 9]", score, id));
    by_unit[a->uoa].emplace_back(id, 1.0 + (score - 1.0) * 3.0 / 8.0);
  }

  GoldStandard gold;
  gold.kind = GoldKind::individual;
  for (const auto& [uoa, entries] : by_unit) {
    auto target = unit_targets.find(uoa);
    if (target == unit_targets.end())
      throw CorpusError(fmt::format("no target mean configured for uoa {}", uoa));
    double sum = 0.0;
    for (const auto& e : entries) sum += e.second;
    const double shift = target->second - sum / static_cast<double>(entries.size());
    for (const auto& [id, mapped] : entries) gold.scores[id] = std::clamp(mapped + shift, 1.0, 4.0);
  }
  return gold;
}

std::map<std::string, std::vector<double>> load_gold_rows(const std::filesystem::path& path) {
  const auto lines = split_lines(read_text_file(path));
  if (lines.empty()) throw CorpusError(fmt::format("{}: empty gold file", path.string()));
  const auto header = parse_csv_line(lines[0]);
  if (header.size() != 2 || header[0] != "article_id" || header[1] != "score")
    throw CorpusError(fmt::format("{}: expected header 'article_id,score'", path.string()));

  std::map<std::string, std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto fields = parse_csv_line(lines[i]);
    double value = 0.0;
    std::size_t consumed = 0;
    bool ok = fields.size() == 2 && !fields[0].empty();
    if (ok) {
      try {
        value = std::stod(fields[1], &consumed);
        ok = consumed == fields[1].size();
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) throw CorpusError(fmt::format("{}:{}: malformed gold row", path.string(), i + 1));
    rows[fields[0]].push_back(value);
  }
  return rows;
}

GoldStandard load_gold(const std::filesystem::path& path, GoldKind kind, const ArticleSet& set) {
  GoldStandard gold;
  gold.kind = kind;
  for (const auto& [id, values] : load_gold_rows(path)) {
    if (values.size() != 1)
      throw CorpusError(fmt::format("{}: article '{}' listed {} times", path.string(), id, values.size()));
    if (!set.find(id)) continue;
    if (!(values[0] >= 1.0 && values[0] <= 4.0))
      throw CorpusError(fmt::format("{}: score {} for '{}' is outside [1, 4]", path.string(), values[0], id));
    gold.scores[id] = values[0];
  }
  return gold;
}

std::string serialize_gold(const GoldStandard& gold) {
  std::string out = "article_id,score\n";
  for (const auto& [id, score] : gold.scores) out += csv_row({id, format_number(score, 12)});
  return out;
}

FewShotPool parse_fewshot_pool(const std::string& text, const std::string& source,
                               const ArticleSet& eval_set, const std::vector<int>& units) {
  std::map<int, std::array<std::vector<ExemplarArticle>, kStarLevels>> cells;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    ExemplarArticle ex;
    try {
      const json rec = json::parse(lines[i]);
      ex.article = article_from_json(rec, units);
      auto star = rec.find("star");
      if (star == rec.end() || !star->is_number_integer())
        throw CorpusError("missing or non-integer 'star'");
      ex.star = star->get<int>();
      if (ex.star < 1 || ex.star > kStarLevels)
        throw CorpusError(fmt::format("star {} outside 1..4", ex.star));
    } catch (const json::exception& e) {
      throw CorpusError(fmt::format("{}:{}: malformed exemplar: {}", source, i + 1, e.what()));
    } catch (const CorpusError& e) {
      throw CorpusError(fmt::format("{}:{}: malformed exemplar: {}", source, i + 1, e.what()));
    }
    if (eval_set.find(ex.article.id))
      throw CorpusError(fmt::format("{}: exemplar '{}' also appears in the evaluation set", source,
                                    ex.article.id));
    const int uoa = ex.article.uoa;
    cells[uoa][static_cast<std::size_t>(ex.star - 1)].push_back(std::move(ex));
  }

  FewShotPool pool;
  for (auto& [uoa, stars] : cells) {
    auto& unit = pool.units[uoa];
    for (int s = 1; s <= kStarLevels; ++s) {
      auto& found = stars[static_cast<std::size_t>(s - 1)];
      if (found.size() != kExemplarsPerCell)
        throw CorpusError(fmt::format("{}: cell (uoa {}, {}*) has {} exemplars, expected {}", source,
                                      uoa, s, found.size(), kExemplarsPerCell));
      for (std::size_t k = 0; k < kExemplarsPerCell; ++k)
        unit[static_cast<std::size_t>(s - 1)][k] = std::move(found[k]);
    }
  }
  return pool;
}

FewShotPool load_fewshot_pool(const std::filesystem::path& path, const ArticleSet& eval_set,
                              const std::vector<int>& units) {
  return parse_fewshot_pool(read_text_file(path), path.string(), eval_set, units);
}

}  // namespace rqa
