#include "rqa/wata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "rqa/io.hpp"
#include "rqa/rng.hpp"

namespace rqa {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

char lower(unsigned char c) { return static_cast<char>(c < 0x80 ? std::tolower(c) : c); }

}  // namespace

TokenizedDoc tokenize(std::string_view text, std::string id) {
  TokenizedDoc doc;
  doc.id = std::move(id);
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) doc.terms.insert(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (word_byte(c))
      cur.push_back(lower(c));
    else
      flush();
  }
  flush();
  return doc;
}

double chi_square_2x2(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  // Integer numerator and margin product keep the statistic identical when
  // the two corpora are swapped.
  const unsigned __int128 r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  const unsigned __int128 margins = r1 * r2 * c1 * c2;
  if (margins == 0) return 0.0;
  const __int128 diff = static_cast<__int128>(a * d) - static_cast<__int128>(b * c);
  const unsigned __int128 diff_sq = static_cast<unsigned __int128>(diff * diff);
  const auto n = static_cast<long double>(a + b + c + d);
  return static_cast<double>(n * static_cast<long double>(diff_sq) /
                             static_cast<long double>(margins));
}

double chi_square_sf1(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p[x] < p[y]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    const double adjusted = p[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
    running = std::min(running, adjusted);
    q[order[i]] = running;
  }
  return q;
}

std::vector<TermStat> compare_all(const std::vector<TokenizedDoc>& corpus_a,
                                  const std::vector<TokenizedDoc>& corpus_b,
                                  std::size_t min_doc_freq) {
  if (corpus_a.empty() || corpus_b.empty()) throw WataError("both corpora must be non-empty");
  std::map<std::string, std::pair<std::size_t, std::size_t>> df;
  for (const auto& d : corpus_a)
    for (const auto& t : d.terms) ++df[t].first;
  for (const auto& d : corpus_b)
    for (const auto& t : d.terms) ++df[t].second;

  const std::size_t n_a = corpus_a.size(), n_b = corpus_b.size();
  std::vector<TermStat> out;
  for (const auto& [term, counts] : df) {
    if (counts.first + counts.second < min_doc_freq) continue;
    TermStat s;
    s.term = term;
    s.df_a = counts.first;
    s.df_b = counts.second;
    s.n_a = n_a;
    s.n_b = n_b;
    s.chi2 = chi_square_2x2(s.df_a, n_a - s.df_a, s.df_b, n_b - s.df_b);
    s.p = chi_square_sf1(s.chi2);
    // Cross-multiplied comparison of containment rates.
    s.direction = s.df_a * n_b >= s.df_b * n_a ? Direction::a : Direction::b;
    out.push_back(std::move(s));
  }
  std::vector<double> p;
  p.reserve(out.size());
  for (const auto& s : out) p.push_back(s.p);
  const auto q = benjamini_hochberg(p);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].q = std::max(q[i], out[i].p);
  return out;
}

std::vector<TermStat> compare(const std::vector<TokenizedDoc>& corpus_a,
                              const std::vector<TokenizedDoc>& corpus_b,
                              const CompareOptions& options) {
  auto all = compare_all(corpus_a, corpus_b, options.min_doc_freq);
  std::vector<TermStat> out;
  for (auto& s : all)
    if (s.q <= options.q_threshold && s.chi2 > 0.0) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), [](const TermStat& x, const TermStat& y) {
    if (x.chi2 != y.chi2) return x.chi2 > y.chi2;
    return x.term < y.term;
  });
  return out;
}

std::vector<KwicLine> kwic(std::string_view term, const std::vector<RawDoc>& corpus,
                           std::size_t k, std::size_t window, std::uint64_t seed) {
  if (k < 1) throw WataError("KWIC sample size must be at least 1");
  std::string needle;
  for (unsigned char c : term) needle.push_back(lower(c));
  if (needle.empty()) return {};

  struct Hit {
    std::size_t doc;
    std::size_t pos;
  };
  std::vector<Hit> hits;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const std::string& text = corpus[d].text;
    std::string folded;
    folded.reserve(text.size());
    for (unsigned char c : text) folded.push_back(lower(c));
    for (std::size_t pos = folded.find(needle); pos != std::string::npos;
         pos = folded.find(needle, pos + 1)) {
      const bool left_ok = pos == 0 || !word_byte(static_cast<unsigned char>(folded[pos - 1]));
      const std::size_t end = pos + needle.size();
      const bool right_ok = end == folded.size() || !word_byte(static_cast<unsigned char>(folded[end]));
      if (left_ok && right_ok) hits.push_back({d, pos});
    }
  }

  if (hits.size() > k) {
    Rng rng = make_rng(seed, "kwic", stable_hash(needle));
    for (std::size_t i = 0; i < k; ++i) std::swap(hits[i], hits[i + uniform_index(rng, hits.size() - i)]);
    hits.resize(k);
    std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
      return x.doc != y.doc ? x.doc < y.doc : x.pos < y.pos;
    });
  }

  std::vector<KwicLine> out;
  for (const auto& h : hits) {
    const std::string& text = corpus[h.doc].text;
    const std::size_t from = h.pos > window ? h.pos - window : 0;
    const std::size_t end = h.pos + needle.size();
    KwicLine line;
    line.doc_id = corpus[h.doc].id;
    line.left = text.substr(from, h.pos - from);
    line.term = text.substr(h.pos, needle.size());
    line.right = text.substr(end, std::min(window, text.size() - end));
    for (auto* s : {&line.left, &line.right})
      std::replace_if(s->begin(), s->end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
    out.push_back(std::move(line));
  }
  return out;
}

std::string term_stats_csv(const std::vector<TermStat>& stats, std::string_view label_a,
                           std::string_view label_b) {
  std::string out = fmt::format(
      "# containment = share of reports containing the term; chi-square 1 d.f. without continuity "
      "correction; q = Benjamini-Hochberg (FDR)\n"
      "term,df_{0},n_{0},pct_{0},df_{1},n_{1},pct_{1},chi2,p,q,direction\n",
      label_a, label_b);
  for (const auto& s : stats) {
    out += csv_row({s.term, std::to_string(s.df_a), std::to_string(s.n_a),
                    format_number(100.0 * s.rate_a(), 1), std::to_string(s.df_b),
                    std::to_string(s.n_b), format_number(100.0 * s.rate_b(), 1),
                    format_number(s.chi2, 4), fmt::format("{:.6g}", s.p), fmt::format("{:.6g}", s.q),
                    std::string(s.direction == Direction::a ? label_a : label_b)});
  }
  return out;
}

}  // namespace rqa
