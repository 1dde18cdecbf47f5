#include "rqa/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "rqa/rng.hpp"

namespace rqa {

namespace {

std::map<std::string, double> to_map(const ScoreMatrix& m, const FusedVector& v) {
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    if (v[r]) out[m.rows[r]] = *v[r];
  return out;
}

std::vector<double> available(const std::vector<std::optional<Cell>>& row) {
  std::vector<double> out;
  for (const auto& c : row)
    if (c) out.push_back(c->mean);
  return out;
}

void require_columns(const ScoreMatrix& m) {
  if (m.columns.empty()) throw FusionError("fusion needs at least one score column");
}

constexpr double kUndefined = -2.0;

// Spearman against precomputed gold ranks; kUndefined for a constant fused vector.
double rank_objective(const std::vector<double>& fused, const std::vector<double>& gold_ranks) {
  try {
    return pearson(midranks(fused), gold_ranks);
  } catch (const StatsError&) {
    return kUndefined;
  }
}

}  // namespace

FusedVector mean_fusion(const ScoreMatrix& m) {
  require_columns(m);
  FusedVector out(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto vals = available(m.cells[r]);
    if (vals.empty()) continue;
    out[r] = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
  }
  return out;
}

FusedVector median_fusion(const ScoreMatrix& m) {
  require_columns(m);
  FusedVector out(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    auto vals = available(m.cells[r]);
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    const std::size_t k = vals.size();
    out[r] = k % 2 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
  }
  return out;
}

FusedVector rank_average_fusion(const ScoreMatrix& m) {
  require_columns(m);
  std::vector<double> sum(m.rows.size(), 0.0);
  std::vector<int> count(m.rows.size(), 0);
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    std::vector<std::size_t> present;
    std::vector<double> values;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      if (!m.cells[r][c]) continue;
      present.push_back(r);
      values.push_back(m.cells[r][c]->mean);
    }
    const auto ranks = midranks(values);
    for (std::size_t i = 0; i < present.size(); ++i) {
      sum[present[i]] += ranks[i];
      ++count[present[i]];
    }
  }
  FusedVector out(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    if (count[r]) out[r] = sum[r] / count[r];
  return out;
}

double fused_spearman(const ScoreMatrix& m, const FusedVector& fused, const GoldStandard& gold) {
  const Paired p = pair_up(to_map(m, fused), gold.scores);
  return spearman(p.x, p.y);
}

FusionData fusion_data(const ScoreMatrix& m, const GoldStandard& gold,
                       const std::map<std::string, int>& unit_of) {
  FusionData d;
  d.columns.resize(m.columns.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    auto g = gold.scores.find(m.rows[r]);
    if (g == gold.scores.end()) continue;
    const auto& row = m.cells[r];
    if (!std::all_of(row.begin(), row.end(), [](const auto& c) { return c.has_value(); })) continue;
    d.ids.push_back(m.rows[r]);
    auto u = unit_of.find(m.rows[r]);
    d.units.push_back(u == unit_of.end() ? 0 : u->second);
    for (std::size_t c = 0; c < row.size(); ++c) d.columns[c].push_back(row[c]->mean);
    d.gold.push_back(g->second);
  }
  return d;
}

std::vector<double> weighted_sum(const FusionData& d, const std::vector<double>& w) {
  std::vector<double> out(d.gold.size(), 0.0);
  for (std::size_t c = 0; c < d.columns.size(); ++c)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[c] * d.columns[c][i];
  return out;
}

FusionWeights de_optimize(const FusionData& data, const DeParams& params, std::uint64_t seed) {
  const std::size_t dim = data.columns.size();
  const std::size_t np = params.population;
  if (dim < 2) throw FusionError("weighted fusion needs at least two score columns");
  if (data.gold.size() < 10)
    throw FusionError(fmt::format("weighted fusion needs at least 10 scored articles, got {}",
                                  data.gold.size()));
  if (np < 4) throw FusionError("differential evolution needs a population of at least 4");
  if (!(params.upper > params.lower)) throw FusionError("DE bounds are empty");

  std::vector<double> gold_ranks;
  try {
    gold_ranks = midranks(data.gold);
    (void)pearson(gold_ranks, gold_ranks);
  } catch (const StatsError&) {
    throw FusionError("objective undefined: gold scores are constant");
  }

  Rng rng = make_rng(seed, "de");
  const double span = params.upper - params.lower;
  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  std::vector<double> fit(np);
  for (std::size_t i = 0; i < np; ++i) {
    for (double& x : pop[i]) x = params.lower + span * uniform01(rng);
    fit[i] = rank_objective(weighted_sum(data, pop[i]), gold_ranks);
  }

  auto best_index = [&] {
    return static_cast<std::size_t>(std::max_element(fit.begin(), fit.end()) - fit.begin());
  };
  FusionWeights out;
  out.history.push_back(fit[best_index()]);

  std::vector<double> trial(dim);
  for (std::size_t gen = 0; gen < params.generations; ++gen) {
    auto next = pop;
    auto next_fit = fit;
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r1, r2, r3;
      do r1 = uniform_index(rng, np); while (r1 == i);
      do r2 = uniform_index(rng, np); while (r2 == i || r2 == r1);
      do r3 = uniform_index(rng, np); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t forced = uniform_index(rng, dim);
      for (std::size_t j = 0; j < dim; ++j) {
        const bool cross = j == forced || uniform01(rng) < params.crossover;
        const double mutant = pop[r1][j] + params.mutation * (pop[r2][j] - pop[r3][j]);
        trial[j] = std::clamp(cross ? mutant : pop[i][j], params.lower, params.upper);
      }
      const double f = rank_objective(weighted_sum(data, trial), gold_ranks);
      if (f >= fit[i]) {
        next[i] = trial;
        next_fit[i] = f;
      }
    }
    pop = std::move(next);
    fit = std::move(next_fit);
    out.history.push_back(fit[best_index()]);
  }

  const std::size_t best = best_index();
  if (fit[best] == kUndefined) throw FusionError("objective undefined for every candidate");
  out.w = pop[best];
  out.objective = fit[best];
  return out;
}

std::vector<int> assign_folds(const std::vector<std::string>& ids, const std::vector<int>& units,
                              int folds, std::uint64_t seed) {
  if (folds < 2) throw FusionError("cross-validation needs at least two folds");
  std::map<int, std::vector<std::size_t>> by_unit;
  for (std::size_t i = 0; i < ids.size(); ++i) by_unit[units.empty() ? 0 : units[i]].push_back(i);
  std::vector<int> fold(ids.size(), 0);
  std::size_t dealt = 0;
  for (auto& [unit, idx] : by_unit) {
    Rng rng = make_rng(seed, "folds", static_cast<std::uint64_t>(unit));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    for (std::size_t i : idx) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

namespace {

FusionData subset(const FusionData& d, const std::vector<int>& fold, int f, bool in_fold) {
  FusionData out;
  out.columns.resize(d.columns.size());
  for (std::size_t i = 0; i < d.gold.size(); ++i) {
    if ((fold[i] == f) != in_fold) continue;
    out.ids.push_back(d.ids[i]);
    out.units.push_back(d.units[i]);
    out.gold.push_back(d.gold[i]);
    for (std::size_t c = 0; c < d.columns.size(); ++c) out.columns[c].push_back(d.columns[c][i]);
  }
  return out;
}

}  // namespace

CvResult cv_fusion(const FusionData& data, int folds, std::uint64_t seed, const DeParams& params) {
  if (folds < 2) throw FusionError("cross-validation needs at least two folds");
  const auto need = static_cast<std::size_t>(folds) * 3;
  if (data.gold.size() < need)
    throw FusionError(fmt::format("{}-fold cross-validation needs at least {} scored articles, got {}",
                                  folds, need, data.gold.size()));

  const auto fold = assign_folds(data.ids, data.units, folds, seed);
  CvResult out;
  for (int f = 0; f < folds; ++f) {
    const FusionData train = subset(data, fold, f, false);
    const FusionData test = subset(data, fold, f, true);
    if (test.gold.size() < 3)
      throw FusionError(fmt::format("fold {} has {} articles; a correlation needs 3", f + 1,
                                    test.gold.size()));
    FusionWeights w = de_optimize(train, params, derive_seed(seed, "cv-de", static_cast<std::uint64_t>(f)));
    double rho;
    try {
      rho = spearman(weighted_sum(test, w.w), test.gold);
    } catch (const StatsError& e) {
      throw FusionError(fmt::format("fold {}: {}", f + 1, e.what()));
    }
    out.fold_rhos.push_back(rho);
    out.fold_weights.push_back(std::move(w));
  }
  out.mean_rho = std::accumulate(out.fold_rhos.begin(), out.fold_rhos.end(), 0.0) /
                 static_cast<double>(out.fold_rhos.size());
  return out;
}

BestSingle best_single(const ScoreMatrix& m, const GoldStandard& gold) {
  require_columns(m);
  std::optional<BestSingle> best;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    std::map<std::string, double> col;
    for (std::size_t r = 0; r < m.rows.size(); ++r)
      if (m.cells[r][c]) col[m.rows[r]] = m.cells[r][c]->mean;
    const Paired p = pair_up(col, gold.scores);
    const double rho = spearman(p.x, p.y);
    const std::string label = m.columns[c].label();
    if (!best || rho > best->rho || (rho == best->rho && label < best->column)) best = {label, rho};
  }
  return *best;
}

FusionRow fusion_row(const std::string& label, const ScoreMatrix& matrix, const GoldStandard& gold,
                     const std::map<std::string, int>& unit_of, int folds, std::uint64_t seed,
                     const DeParams& params) {
  FusionRow row;
  row.label = label;
  const FusedVector mean = mean_fusion(matrix);
  row.n = pair_up(to_map(matrix, mean), gold.scores).ids.size();
  row.mean = fused_spearman(matrix, mean, gold);
  row.median = fused_spearman(matrix, median_fusion(matrix), gold);
  const BestSingle single = best_single(matrix, gold);
  row.best_single = single.rho;
  row.best_column = single.column;
  row.rank_average = fused_spearman(matrix, rank_average_fusion(matrix), gold);
  row.cv = cv_fusion(fusion_data(matrix, gold, unit_of), folds, seed, params);
  row.cv_mean = row.cv.mean_rho;
  return row;
}

std::pair<ScoreMatrix, GoldStandard> unit_rank_normalise(const ScoreMatrix& matrix,
                                                         const GoldStandard& gold,
                                                         const std::map<std::string, int>& unit_of) {
  auto unit = [&](const std::string& id) {
    auto it = unit_of.find(id);
    return it == unit_of.end() ? 0 : it->second;
  };
  ScoreMatrix out = matrix;
  for (std::size_t c = 0; c < matrix.columns.size(); ++c) {
    std::map<int, std::vector<std::size_t>> rows_by_unit;
    for (std::size_t r = 0; r < matrix.rows.size(); ++r)
      if (matrix.cells[r][c]) rows_by_unit[unit(matrix.rows[r])].push_back(r);
    for (const auto& [u, rows] : rows_by_unit) {
      std::vector<double> v;
      for (std::size_t r : rows) v.push_back(matrix.cells[r][c]->mean);
      const auto ranks = midranks(v);
      for (std::size_t i = 0; i < rows.size(); ++i)
        out.cells[rows[i]][c]->mean = ranks[i] / static_cast<double>(rows.size());
    }
  }

  GoldStandard g;
  g.kind = gold.kind;
  std::map<int, std::vector<std::pair<std::string, double>>> gold_by_unit;
  for (const auto& [id, s] : gold.scores) gold_by_unit[unit(id)].emplace_back(id, s);
  for (const auto& [u, entries] : gold_by_unit) {
    std::vector<double> v;
    for (const auto& e : entries) v.push_back(e.second);
    const auto ranks = midranks(v);
    for (std::size_t i = 0; i < entries.size(); ++i)
      g.scores[entries[i].first] = ranks[i] / static_cast<double>(entries.size());
  }
  return {std::move(out), std::move(g)};
}

}  // namespace rqa
