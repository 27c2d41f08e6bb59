#pragma once

// Annotation pairs: selection by combined style/semantic distance,
// unblinding and aggregation of pairwise ratings, per-dimension statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lexshift/common/error.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/features.hpp"
#include "lexshift/stats.hpp"
#include "lexshift/tokenclust.hpp"

namespace lexshift::annot {

// Pair selection.

struct PairRecord {
  std::string pair_id;
  std::string human_ref;  // row id of the human version in the feature matrix
  std::string llm_ref;
  double style_distance = 0.0;
  double semantic_distance = 0.0;
  double style_z = 0.0;
  double semantic_z = 0.0;
  double avg_distance = 0.0;
  bool curate = false;
};

namespace detail {

inline double cosine_distance(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

inline std::vector<double> zscores(const std::vector<double>& v) {
  std::vector<double> z(v.size(), 0.0);
  if (v.size() < 2) return z;
  double m = stats::mean(v), sd = stats::sample_sd(v);
  if (sd == 0.0) return z;
  for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - m) / sd;
  return z;
}

}  // namespace detail

/// Rows of `style` are keyed by paragraph_id = pair id and outcome 0 (human)
/// or 1 (llm). An unstandardized matrix is z-scored over all rows first.
/// Ranked by descending avg_distance (ties: pair id); the first `top_n` are
/// flagged for curation.
inline std::vector<PairRecord> select_pairs(const features::FeatureMatrix& style,
                                            const cluster::SentenceEmbeddingSet& semantic, std::size_t top_n = 300) {
  const features::FeatureMatrix z = style.scaling.empty() && style.rows.size() >= 2 ? features::standardize(style) : style;
  std::map<std::string, std::array<const features::FeatureVector*, 2>> rows;
  for (const auto& r : z.rows) {
    auto& slot = rows[r.paragraph_id][static_cast<std::size_t>(r.outcome)];
    if (slot) throw Error(Errc::MalformedRow, "pair " + r.paragraph_id + " has two rows for one version");
    slot = &r;
  }
  std::map<std::string, std::array<const cluster::SentenceRecord*, 2>> sents;
  for (const auto& s : semantic.records) {
    auto& slot = sents[s.pair_id][s.version == "llm" ? 1 : 0];
    if (slot) throw Error(Errc::MalformedRow, "pair " + s.pair_id + " has two embeddings for one version");
    slot = &s;
  }
  std::set<std::string> ids;
  for (auto& [k, _] : rows) ids.insert(k);
  for (auto& [k, _] : sents) ids.insert(k);

  std::vector<PairRecord> out;
  for (const auto& id : ids) {
    auto r = rows.find(id);
    auto s = sents.find(id);
    if (r == rows.end() || !r->second[0] || !r->second[1] || s == sents.end() || !s->second[0] || !s->second[1])
      throw Error(Errc::MissingVersion, "pair " + id + " lacks a human or llm version");
    PairRecord p;
    p.pair_id = id;
    p.human_ref = r->second[0]->paragraph_id + ":human";
    p.llm_ref = r->second[1]->paragraph_id + ":llm";
    double ss = 0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double d = r->second[0]->values[j] - r->second[1]->values[j];
      ss += d * d;
    }
    p.style_distance = std::sqrt(ss);
    p.semantic_distance = detail::cosine_distance(s->second[0]->vector, s->second[1]->vector);
    out.push_back(std::move(p));
  }
  std::vector<double> sd, md;
  for (auto& p : out) {
    sd.push_back(p.style_distance);
    md.push_back(p.semantic_distance);
  }
  auto zs = detail::zscores(sd), zm = detail::zscores(md);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].style_z = zs[i];
    out[i].semantic_z = zm[i];
    out[i].avg_distance = 0.5 * (zs[i] + zm[i]);
  }
  std::stable_sort(out.begin(), out.end(), [](const PairRecord& a, const PairRecord& b) {
    if (a.avg_distance != b.avg_distance) return a.avg_distance > b.avg_distance;
    return a.pair_id < b.pair_id;
  });
  for (std::size_t i = 0; i < std::min(top_n, out.size()); ++i) out[i].curate = true;
  return out;
}

// Ratings.

enum class Choice { strongly_a, slightly_a, slightly_b, strongly_b };
enum class Version { human, llm };

inline std::optional<Choice> parse_choice(std::string_view s) {
  auto l = text::lower(text::trim(s));
  for (char& c : l)
    if (c == ' ' || c == '-') c = '_';
  if (l == "strongly_a") return Choice::strongly_a;
  if (l == "slightly_a") return Choice::slightly_a;
  if (l == "slightly_b") return Choice::slightly_b;
  if (l == "strongly_b") return Choice::strongly_b;
  return std::nullopt;
}

inline std::string_view choice_name(Choice c) {
  switch (c) {
    case Choice::strongly_a: return "strongly_A";
    case Choice::slightly_a: return "slightly_A";
    case Choice::slightly_b: return "slightly_B";
    case Choice::strongly_b: return "strongly_B";
  }
  return "";
}

inline std::optional<Version> parse_version(std::string_view s) {
  auto l = text::lower(text::trim(s));
  if (l == "human") return Version::human;
  if (l == "llm") return Version::llm;
  return std::nullopt;
}

inline constexpr std::string_view kDimensions[] = {"clarity", "authenticity", "trustworthiness", "excitement"};

inline bool valid_dimension(std::string_view d) {
  return std::find(std::begin(kDimensions), std::end(kDimensions), d) != std::end(kDimensions);
}

struct RatingRecord {
  std::string pair_id;
  std::string rater_id;
  std::string dimension;
  int item = 1;
  Choice raw = Choice::slightly_a;
  std::optional<Version> shown_a;  // falls back to the assignment table when absent
};

using AssignmentTable = std::map<std::string, Version>;  // pair id -> text shown as A

/// Unblinded score: positive = human original preferred.
inline int unblind(Choice c, Version shown_a) {
  int a_side = c == Choice::strongly_a ? 2 : c == Choice::slightly_a ? 1 : c == Choice::slightly_b ? -1 : -2;
  return shown_a == Version::human ? a_side : -a_side;
}

namespace detail {
inline Version shown_a(const RatingRecord& r, const AssignmentTable& key) {
  std::optional<Version> a = r.shown_a;
  auto it = key.find(r.pair_id);
  if (it != key.end()) {
    if (a && *a != it->second)
      throw Error(Errc::UnresolvedAssignment, "pair " + r.pair_id + " has conflicting A/B assignments");
    a = it->second;
  }
  if (!a) throw Error(Errc::UnresolvedAssignment, "pair " + r.pair_id + " has no A/B assignment");
  return *a;
}
}  // namespace detail

enum class Unit { pair, pair_rater };

struct DimensionScore {
  std::string pair_id;
  std::string rater_id;  // empty for the pair unit
  std::string dimension;
  double score = 0.0;
  std::size_t n_ratings = 0;
};

/// Per (pair, dimension) (or per (pair, rater, dimension)) mean of unblinded
/// item scores. Output sorted by dimension, pair, rater.
inline std::vector<DimensionScore> aggregate_preferences(const std::vector<RatingRecord>& ratings,
                                                         const AssignmentTable& key = {}, Unit unit = Unit::pair) {
  std::set<std::tuple<std::string, std::string, std::string, int>> seen;
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& r : ratings) {
    if (!seen.insert({r.pair_id, r.rater_id, r.dimension, r.item}).second)
      throw Error(Errc::DuplicateRating, "pair " + r.pair_id + ", rater " + r.rater_id + ", " + r.dimension +
                                             " item " + std::to_string(r.item) + " rated twice");
    auto& cell = acc[{r.dimension, r.pair_id, unit == Unit::pair ? std::string() : r.rater_id}];
    cell.first += unblind(r.raw, detail::shown_a(r, key));
    ++cell.second;
  }
  std::vector<DimensionScore> out;
  for (auto& [k, v] : acc)
    out.push_back({std::get<1>(k), std::get<2>(k), std::get<0>(k), v.first / static_cast<double>(v.second), v.second});
  return out;
}

/// Unblinded rating counts per dimension, indexed as strongly human,
/// slightly human, slightly LLM, strongly LLM.
struct PreferenceCounts {
  std::string dimension;
  std::array<std::size_t, 4> counts{};

  std::size_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  double share(std::size_t i) const { return total() ? static_cast<double>(counts[i]) / static_cast<double>(total()) : 0.0; }
};

inline std::vector<PreferenceCounts> preference_distribution(const std::vector<RatingRecord>& ratings,
                                                             const AssignmentTable& key = {}) {
  std::map<std::string, PreferenceCounts> acc;
  for (const auto& r : ratings) {
    int s = unblind(r.raw, detail::shown_a(r, key));
    auto& c = acc[r.dimension];
    c.dimension = r.dimension;
    ++c.counts[s == 2 ? 0 : s == 1 ? 1 : s == -1 ? 2 : 3];
  }
  std::vector<PreferenceCounts> out;
  for (auto d : kDimensions)
    if (auto it = acc.find(std::string(d)); it != acc.end()) out.push_back(it->second);
  for (auto& [d, c] : acc)
    if (!valid_dimension(d)) out.push_back(c);
  return out;
}

struct DimensionStats {
  std::string dimension;
  std::size_t n = 0;
  double mean = 0.0;
  double t = 0.0;
  double t_p = 1.0;
  double wilcoxon_w = 0.0;
  double wilcoxon_p = 1.0;
  double cohens_d = 0.0;
  bool all_zero = false;  // Wilcoxon undefined; p reported as 1
};

/// One-sample t and Wilcoxon signed-rank against 0, and one-sample Cohen's d.
inline DimensionStats dimension_stats(const std::vector<DimensionScore>& scores, std::string_view dimension) {
  std::vector<double> x;
  for (const auto& s : scores)
    if (s.dimension == dimension) x.push_back(s.score);
  if (x.size() < 2)
    throw Error(Errc::EmptySample, "dimension " + std::string(dimension) + " has " + std::to_string(x.size()) + " scores");
  DimensionStats st;
  st.dimension = std::string(dimension);
  st.n = x.size();
  st.mean = stats::mean(x);
  if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) {
    st.all_zero = true;
    return st;
  }
  auto t = stats::one_sample_t(x);
  st.t = t.statistic;
  st.t_p = t.p_value;
  auto w = stats::wilcoxon_signed_rank(x);
  st.wilcoxon_w = w.statistic;
  st.wilcoxon_p = w.p_value;
  st.cohens_d = stats::cohens_d_one_sample(x);
  return st;
}

// CSV I/O.

inline std::vector<RatingRecord> parse_ratings(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (lines.empty() || text::trim(lines[0]).empty()) throw Error(Errc::SchemaMismatch, "ratings CSV has no header");
  auto header = features::detail::csv_fields(text::trim(lines[0]));
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[text::lower(text::trim(header[i]))] = i;
  for (const char* need : {"pair_id", "rater_id", "dimension", "item", "raw_choice"})
    if (!col.count(need)) throw Error(Errc::SchemaMismatch, std::string("ratings CSV lacks column ") + need, 1);
  std::optional<std::size_t> shown = col.count("shown_a") ? std::optional(col["shown_a"]) : std::nullopt;
  std::vector<RatingRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto f = features::detail::csv_fields(line);
    if (f.size() < header.size()) throw Error(Errc::MalformedRow, "ratings row has too few fields", i + 1);
    RatingRecord r;
    r.pair_id = std::string(text::trim(f[col["pair_id"]]));
    r.rater_id = std::string(text::trim(f[col["rater_id"]]));
    r.dimension = text::lower(text::trim(f[col["dimension"]]));
    if (!valid_dimension(r.dimension)) throw Error(Errc::MalformedRow, "unknown dimension '" + r.dimension + "'", i + 1);
    r.item = lexshift::detail::parse_int(text::trim(f[col["item"]]), i + 1, "item");
    if (r.item != 1 && r.item != 2) throw Error(Errc::MalformedRow, "item must be 1 or 2", i + 1);
    auto c = parse_choice(f[col["raw_choice"]]);
    if (!c) throw Error(Errc::MalformedRow, "unknown choice '" + f[col["raw_choice"]] + "'", i + 1);
    r.raw = *c;
    if (shown && !text::trim(f[*shown]).empty()) {
      auto v = parse_version(f[*shown]);
      if (!v) throw Error(Errc::MalformedRow, "shown_A must be human or llm", i + 1);
      r.shown_a = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline AssignmentTable parse_assignments(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (lines.empty()) throw Error(Errc::SchemaMismatch, "assignment CSV has no header");
  auto header = features::detail::csv_fields(text::trim(lines[0]));
  if (header.size() < 2 || text::lower(text::trim(header[0])) != "pair_id" ||
      text::lower(text::trim(header[1])) != "shown_a")
    throw Error(Errc::SchemaMismatch, "assignment CSV header must be pair_id,shown_A", 1);
  AssignmentTable t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto f = features::detail::csv_fields(line);
    if (f.size() < 2) throw Error(Errc::MalformedRow, "assignment row needs 2 fields", i + 1);
    auto v = parse_version(f[1]);
    if (!v) throw Error(Errc::MalformedRow, "shown_A must be human or llm", i + 1);
    if (!t.emplace(std::string(text::trim(f[0])), *v).second)
      throw Error(Errc::UnresolvedAssignment, "pair " + f[0] + " assigned twice", i + 1);
  }
  return t;
}

namespace detail {
inline std::string num(double v, int prec = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}
}  // namespace detail

inline std::string stats_to_tsv(const std::vector<DimensionStats>& rows) {
  std::string out = "dimension\tn\tmean\tt\tt_p\twilcoxon_w\twilcoxon_p\tcohens_d\tflag\n";
  for (const auto& r : rows)
    out += r.dimension + "\t" + std::to_string(r.n) + "\t" + detail::num(r.mean) + "\t" + detail::num(r.t) + "\t" +
           detail::num(r.t_p) + "\t" + detail::num(r.wilcoxon_w, 1) + "\t" + detail::num(r.wilcoxon_p) + "\t" +
           detail::num(r.cohens_d) + "\t" + (r.all_zero ? "all_zero" : "") + "\n";
  return out;
}

inline std::string pairs_to_tsv(const std::vector<PairRecord>& rows) {
  std::string out = "rank\tpair_id\tstyle_distance\tsemantic_distance\tstyle_z\tsemantic_z\tavg_distance\tcurate\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += std::to_string(i + 1) + "\t" + r.pair_id + "\t" + detail::num(r.style_distance) + "\t" +
           detail::num(r.semantic_distance) + "\t" + detail::num(r.style_z) + "\t" + detail::num(r.semantic_z) + "\t" +
           detail::num(r.avg_distance) + "\t" + (r.curate ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string scores_to_tsv(const std::vector<DimensionScore>& rows) {
  std::string out = "dimension\tpair_id\trater_id\tscore\tn_ratings\n";
  for (const auto& r : rows)
    out += r.dimension + "\t" + r.pair_id + "\t" + r.rater_id + "\t" + detail::num(r.score) + "\t" +
           std::to_string(r.n_ratings) + "\n";
  return out;
}

inline std::string distribution_to_tsv(const std::vector<PreferenceCounts>& rows) {
  std::string out = "dimension\tstrongly_human\tslightly_human\tslightly_llm\tstrongly_llm\ttotal\n";
  for (const auto& r : rows) {
    out += r.dimension;
    for (auto c : r.counts) out += "\t" + std::to_string(c);
    out += "\t" + std::to_string(r.total()) + "\n";
  }
  return out;
}

}  // namespace lexshift::annot
