#pragma once

// Keyness: log-likelihood and frequency-ratio shift scores, per-POS
// rankings, contrast-corpus overlap marking, word n-grams, and normalized
// temporal distributions of labelled groups.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/corpus.hpp"
#include "lexshift/stats.hpp"

namespace lexshift::freq {

/// Critical value for p < 0.0001 with one degree of freedom.
inline constexpr double kCriticalLL = 15.13;

/// Two-corpus log-likelihood (G2) of a word with count a in a corpus of n1
/// tokens and count b in a corpus of n2 tokens. 0 * ln 0 is taken as 0.
inline double log_likelihood(double a, double n1, double b, double n2) {
  if (!(n1 > 0.0) || !(n2 > 0.0) || a < 0.0 || b < 0.0 || a + b <= 0.0 || a > n1 || b > n2)
    throw Error(Errc::InvalidCounts, "log_likelihood(a=" + std::to_string(a) + ", n1=" + std::to_string(n1) +
                                         ", b=" + std::to_string(b) + ", n2=" + std::to_string(n2) + ")");
  const double total = n1 + n2;
  const double e1 = n1 * (a + b) / total;
  const double e2 = n2 * (a + b) / total;
  double g = 0.0;
  if (a > 0.0) g += a * std::log(a / e1);
  if (b > 0.0) g += b * std::log(b / e2);
  return std::max(0.0, 2.0 * g);
}

/// Per-million frequency in period 2 over per-million frequency in period 1.
inline double frequency_ratio(double a, double n1, double b, double n2) {
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw Error(Errc::InvalidCounts, "frequency_ratio needs positive totals");
  if (a == 0.0 && b == 0.0) throw Error(Errc::Undefined, "frequency_ratio of a word absent from both periods");
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return (b / n2) / (a / n1);
}

inline double per_million(double count, double total) { return total > 0.0 ? count * 1e6 / total : 0.0; }

/// -1, 0, +1 as b/n2 is below, equal to, or above a/n1 (exact integer test).
inline int rate_direction(std::uint64_t a, std::uint64_t n1, std::uint64_t b, std::uint64_t n2) {
  auto lhs = static_cast<unsigned __int128>(b) * n1;
  auto rhs = static_cast<unsigned __int128>(a) * n2;
  return lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
}

enum class Direction { rising, falling };

constexpr std::string_view direction_name(Direction d) noexcept { return d == Direction::rising ? "rising" : "falling"; }

struct ShiftRecord {
  std::string key;                 // lemma, or space-joined n-gram lemmas
  std::optional<CoarsePos> pos;    // unset for n-grams
  std::uint64_t count_t1 = 0;
  std::uint64_t count_t2 = 0;
  double freq_t1_pm = 0.0;
  double freq_t2_pm = 0.0;
  double ll = 0.0;
  double signed_ll = 0.0;          // negative iff the rate drops
  double ratio = 1.0;              // +inf for words new in period 2
  bool significant = false;        // ll > critical value
  bool overlap_llm = false;
  // Filled by the density stage.
  std::optional<double> nd_t1;
  std::optional<double> nd_t2;
  std::optional<double> delta_nd;
  std::optional<double> u_stat;
  std::optional<double> p_value;

  std::string unit() const { return pos ? key + "_" + std::string(pos_name(*pos)) : key; }
  Direction direction() const { return signed_ll < 0.0 ? Direction::falling : Direction::rising; }
};

inline ShiftRecord make_shift_record(std::string key, std::optional<CoarsePos> pos, std::uint64_t a,
                                     std::uint64_t n1, std::uint64_t b, std::uint64_t n2,
                                     double threshold = kCriticalLL) {
  ShiftRecord r;
  r.key = std::move(key);
  r.pos = pos;
  r.count_t1 = a;
  r.count_t2 = b;
  const auto fa = static_cast<double>(a), fb = static_cast<double>(b);
  const auto f1 = static_cast<double>(n1), f2 = static_cast<double>(n2);
  r.freq_t1_pm = per_million(fa, f1);
  r.freq_t2_pm = per_million(fb, f2);
  r.ll = log_likelihood(fa, f1, fb, f2);
  r.ratio = frequency_ratio(fa, f1, fb, f2);
  int dir = rate_direction(a, n1, b, n2);
  r.signed_ll = dir == 0 ? 0.0 : (dir > 0 ? r.ll : -r.ll);
  r.significant = r.ll > threshold;
  return r;
}

/// Shift records for every vocabulary entry (entries absent from both
/// periods are skipped).
inline std::vector<ShiftRecord> score_vocab(const std::vector<VocabEntry>& vocab, const CorpusStats& stats,
                                            double threshold = kCriticalLL) {
  if (stats.tokens_t1 == 0 || stats.tokens_t2 == 0)
    throw Error(Errc::EmptyPeriod, "per-period token totals must both be positive");
  std::vector<ShiftRecord> out;
  out.reserve(vocab.size());
  for (const auto& e : vocab) {
    if (e.count_t1 + e.count_t2 == 0) continue;
    out.push_back(make_shift_record(e.key.lemma, e.key.pos, e.count_t1, stats.tokens_t1, e.count_t2,
                                    stats.tokens_t2, threshold));
  }
  return out;
}

/// Strongest first: LL descending, then combined raw count descending, then key.
inline bool stronger_shift(const ShiftRecord& x, const ShiftRecord& y) {
  if (x.ll != y.ll) return x.ll > y.ll;
  auto cx = x.count_t1 + x.count_t2, cy = y.count_t1 + y.count_t2;
  if (cx != cy) return cx > cy;
  return x.unit() < y.unit();
}

struct DirectionalLists {
  std::vector<ShiftRecord> rising;   // ratio > 1 (signed_ll > 0)
  std::vector<ShiftRecord> falling;  // ratio < 1 (signed_ll < 0)

  std::vector<ShiftRecord>& list(Direction d) { return d == Direction::rising ? rising : falling; }
  const std::vector<ShiftRecord>& list(Direction d) const { return d == Direction::rising ? rising : falling; }
};

using ShiftRanking = std::map<CoarsePos, DirectionalLists>;

/// Splits records into risers and fallers and keeps the top_k of each,
/// ordered by `stronger_shift`. Equal-rate records belong to neither list.
inline DirectionalLists top_shifts(std::vector<ShiftRecord> records, std::size_t top_k) {
  DirectionalLists out;
  for (auto& r : records) {
    if (r.signed_ll > 0.0)
      out.rising.push_back(std::move(r));
    else if (r.signed_ll < 0.0)
      out.falling.push_back(std::move(r));
  }
  for (auto* v : {&out.rising, &out.falling}) {
    std::size_t keep = std::min(top_k, v->size());
    std::partial_sort(v->begin(), v->begin() + static_cast<std::ptrdiff_t>(keep), v->end(), stronger_shift);
    v->resize(keep);
  }
  return out;
}

/// Top-k risers and fallers per coarse POS. Every POS has an entry, possibly empty.
inline ShiftRanking rank_shifts(const std::vector<VocabEntry>& vocab, const CorpusStats& stats,
                                std::size_t top_k = 10, double threshold = kCriticalLL) {
  std::map<CoarsePos, std::vector<ShiftRecord>> by_pos;
  for (auto p : all_coarse_pos) by_pos[p];
  for (auto& r : score_vocab(vocab, stats, threshold)) by_pos[*r.pos].push_back(std::move(r));
  ShiftRanking out;
  for (auto& [pos, recs] : by_pos) out[pos] = top_shifts(std::move(recs), top_k);
  return out;
}

/// Flags natural-corpus records whose key is among the first k contrast
/// records of the same POS and direction.
inline void mark_overlap(ShiftRanking& natural, const ShiftRanking& contrast, std::size_t k = 100) {
  for (auto& [pos, lists] : natural) {
    auto it = contrast.find(pos);
    for (auto dir : {Direction::rising, Direction::falling}) {
      std::set<std::string> keys;
      if (it != contrast.end()) {
        const auto& src = it->second.list(dir);
        for (std::size_t i = 0; i < std::min(k, src.size()); ++i) keys.insert(src[i].key);
      }
      for (auto& r : lists.list(dir)) r.overlap_llm = keys.count(r.key) > 0;
    }
  }
}

/// Spearman correlation of signed LL against delta ND over records that
/// carry a density result.
inline stats::TestResult signed_ll_nd_correlation(const std::vector<ShiftRecord>& records) {
  std::vector<double> x, y;
  for (const auto& r : records)
    if (r.delta_nd) {
      x.push_back(r.signed_ll);
      y.push_back(*r.delta_nd);
    }
  return stats::spearman_rho(x, y);
}

struct NgramRecord {
  std::vector<std::string> lemmas;
  std::uint64_t count_t1 = 0;
  std::uint64_t count_t2 = 0;
  ShiftRecord shift;
};

struct NgramTable {
  std::vector<NgramRecord> records;  // sorted by key
  std::uint64_t windows_t1 = 0;      // qualifying n-gram windows per period
  std::uint64_t windows_t2 = 0;
};

inline bool ngram_lemma_ok(std::string_view lemma) {
  return text::codepoint_count(lemma) >= 2 && text::is_alphabetic(lemma);
}

/// Sentence-internal lemma n-grams with every lemma alphabetic and >= 2
/// characters, kept when attested >= min_freq times in each period. LL
/// uses the qualifying window counts as period totals.
inline NgramTable extract_ngrams(const AnnotatedCorpus& corpus, std::size_t n = 5, std::uint64_t min_freq = 10,
                                 double threshold = kCriticalLL, unsigned threads = default_threads()) {
  if (n < 2) throw Error(Errc::InvalidArgument, "n-gram order must be >= 2");
  using Table = std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>>;
  const auto& docs = corpus.documents();
  std::vector<Table> partial(docs.size());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> windows(docs.size());
  parallel_for(
      docs.size(),
      [&](std::size_t d) {
        const bool t1 = docs[d].period == Period::T1;
        for (const auto& sent : docs[d].sentences) {
          if (sent.size() < n) continue;
          std::vector<std::string> lem;
          std::vector<char> ok;
          lem.reserve(sent.size());
          for (const auto& tok : sent) {
            lem.push_back(text::lower(tok.lemma));
            ok.push_back(ngram_lemma_ok(lem.back()) ? 1 : 0);
          }
          for (std::size_t i = 0; i + n <= sent.size(); ++i) {
            bool good = true;
            for (std::size_t j = i; j < i + n && good; ++j) good = ok[j] != 0;
            if (!good) continue;
            std::string key = lem[i];
            for (std::size_t j = i + 1; j < i + n; ++j) key += ' ' + lem[j];
            auto& c = partial[d][key];
            (t1 ? c.first : c.second) += 1;
            (t1 ? windows[d].first : windows[d].second) += 1;
          }
        }
      },
      threads);
  Table merged;
  NgramTable out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    out.windows_t1 += windows[d].first;
    out.windows_t2 += windows[d].second;
    for (auto& [k, c] : partial[d]) {
      auto& m = merged[k];
      m.first += c.first;
      m.second += c.second;
    }
  }
  for (auto& [k, c] : merged) {
    if (c.first < min_freq || c.second < min_freq) continue;
    NgramRecord rec;
    for (auto part : text::split(k, ' ')) rec.lemmas.emplace_back(part);
    rec.count_t1 = c.first;
    rec.count_t2 = c.second;
    rec.shift = make_shift_record(k, std::nullopt, c.first, out.windows_t1, c.second, out.windows_t2, threshold);
    out.records.push_back(std::move(rec));
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const NgramRecord& a, const NgramRecord& b) { return a.shift.key < b.shift.key; });
  return out;
}

struct GroupDistribution {
  std::uint64_t count_t1 = 0;
  std::uint64_t count_t2 = 0;
  double pct_t1 = 0.0;
  double pct_t2 = 0.0;
  std::uint64_t total = 0;
};

/// Share of each group per period after normalizing by the period's total
/// label count; pct_t1 + pct_t2 = 100 for every group.
inline std::map<std::string, GroupDistribution> temporal_distribution(
    const std::vector<std::pair<std::string, Period>>& labels) {
  std::map<std::string, GroupDistribution> out;
  std::uint64_t total_t1 = 0, total_t2 = 0;
  for (const auto& [group, period] : labels) {
    auto& g = out[group];
    if (period == Period::T1) {
      ++g.count_t1;
      ++total_t1;
    } else {
      ++g.count_t2;
      ++total_t2;
    }
  }
  if (total_t1 == 0 || total_t2 == 0) throw Error(Errc::EmptyPeriod, "temporal_distribution needs labels in both periods");
  for (auto& [group, g] : out) {
    double r1 = static_cast<double>(g.count_t1) / static_cast<double>(total_t1);
    double r2 = static_cast<double>(g.count_t2) / static_cast<double>(total_t2);
    g.pct_t1 = 100.0 * r1 / (r1 + r2);
    g.pct_t2 = 100.0 - g.pct_t1;
    g.total = g.count_t1 + g.count_t2;
  }
  return out;
}

}  // namespace lexshift::freq
