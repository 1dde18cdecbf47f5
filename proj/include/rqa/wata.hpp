#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rqa {

class WataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TokenizedDoc {
  std::string id;
  std::set<std::string> terms;
};

/// Lowercases ASCII, splits on runs of non-alphanumeric bytes (bytes >= 0x80
/// count as word characters so UTF-8 words stay whole) and keeps the set of
/// terms at least two bytes long.
TokenizedDoc tokenize(std::string_view text, std::string id = {});

enum class Direction { a, b };

struct TermStat {
  std::string term;
  std::size_t df_a = 0;
  std::size_t df_b = 0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double chi2 = 0.0;
  double p = 1.0;
  double q = 1.0;
  Direction direction = Direction::a;

  double rate_a() const { return static_cast<double>(df_a) / static_cast<double>(n_a); }
  double rate_b() const { return static_cast<double>(df_b) / static_cast<double>(n_b); }
};

struct CompareOptions {
  double q_threshold = 0.05;
  std::size_t min_doc_freq = 5;
};

/// Pearson chi-square (1 d.f., no continuity correction) for the 2x2 table
/// [[a, b], [c, d]]; 0 when a margin is empty.
double chi_square_2x2(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

/// Survival function of the chi-square distribution with one degree of freedom.
double chi_square_sf1(double x);

/// Benjamini-Hochberg adjusted values, in input order.
std::vector<double> benjamini_hochberg(const std::vector<double>& p);

/// Every term in at least `min_doc_freq` documents overall is tested for a
/// containment-rate difference between the corpora; returns the terms with
/// q <= q_threshold, chi2 descending (term ascending on ties).
std::vector<TermStat> compare(const std::vector<TokenizedDoc>& corpus_a,
                              const std::vector<TokenizedDoc>& corpus_b,
                              const CompareOptions& options = {});

/// All tested terms, before thresholding, in term order.
std::vector<TermStat> compare_all(const std::vector<TokenizedDoc>& corpus_a,
                                  const std::vector<TokenizedDoc>& corpus_b,
                                  std::size_t min_doc_freq = 5);

struct RawDoc {
  std::string id;
  std::string text;
};

struct KwicLine {
  std::string doc_id;
  std::string left;
  std::string term;
  std::string right;
  bool operator==(const KwicLine&) const = default;
};

/// Seeded uniform sample of up to k whole-token occurrences of `term`, each
/// with `window` bytes of context per side. Returned in corpus order.
std::vector<KwicLine> kwic(std::string_view term, const std::vector<RawDoc>& corpus,
                           std::size_t k, std::size_t window, std::uint64_t seed);

std::string term_stats_csv(const std::vector<TermStat>& stats, std::string_view label_a,
                           std::string_view label_b);

}  // namespace rqa
