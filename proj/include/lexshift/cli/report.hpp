#pragma once

// TSV and JSON report writers and the readers used by the plot stage.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexshift/common/error.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/corpus.hpp"
#include "lexshift/embeddings.hpp"
#include "lexshift/features.hpp"
#include "lexshift/freqstats.hpp"
#include "lexshift/regress.hpp"
#include "lexshift/tokenclust.hpp"
#include "lexshift/annot.hpp"

namespace lexshift::cli::report {

using ojson = nlohmann::ordered_json;

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline double parse_num(std::string_view s, std::size_t line, std::string_view what) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  auto v = features::detail::parse_double(s);
  if (!v) throw Error(Errc::SchemaMismatch, std::string(what) + ": '" + std::string(s) + "' is not a number", line);
  return *v;
}

inline std::optional<double> parse_opt(std::string_view s, std::size_t line, std::string_view what) {
  if (s.empty()) return std::nullopt;
  return parse_num(s, line, what);
}

// Corpus summary.

inline ojson corpus_stats_json(const CorpusStats& s) {
  ojson j;
  j["documents_t1"] = s.documents_t1;
  j["documents_t2"] = s.documents_t2;
  j["sentences_t1"] = s.sentences_t1;
  j["sentences_t2"] = s.sentences_t2;
  j["tokens_t1"] = s.tokens_t1;
  j["tokens_t2"] = s.tokens_t2;
  return j;
}

inline std::string paragraphs_to_tsv(const std::vector<Paragraph>& paras) {
  std::string out = "doc_id\tperiod\twindow_index\tsentences\ttokens\n";
  for (const auto& p : paras)
    out += p.doc_id + "\t" + std::string(period_name(p.period)) + "\t" + std::to_string(p.window_index) + "\t" +
           std::to_string(p.sentences.size()) + "\t" + std::to_string(p.token_count()) + "\n";
  return out;
}

// Frequency shift tables.

inline constexpr std::string_view kShiftHeader =
    "POS\tdirection\trank\tTarget\tcount_t1\tcount_t2\tFreq_t1\tFreq_t2\tLL\tsigned_LL\tratio\tsignificant\t"
    "ND_t1\tND_t2\tΔND\tU\tp\toverlap";

/// Ranked records in table order: POS, then risers before fallers, then rank.
struct ShiftRow {
  std::size_t rank = 0;
  freq::ShiftRecord record;
};

inline std::vector<ShiftRow> flatten(const freq::ShiftRanking& ranking) {
  std::vector<ShiftRow> out;
  for (const auto& [pos, lists] : ranking)
    for (auto dir : {freq::Direction::rising, freq::Direction::falling}) {
      const auto& v = lists.list(dir);
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back({i + 1, v[i]});
    }
  return out;
}

inline std::vector<ShiftRow> flatten(const freq::DirectionalLists& lists) {
  std::vector<ShiftRow> out;
  for (auto dir : {freq::Direction::rising, freq::Direction::falling}) {
    const auto& v = lists.list(dir);
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({i + 1, v[i]});
  }
  return out;
}

inline std::string shift_to_tsv(const std::vector<ShiftRow>& rows) {
  std::string out(kShiftHeader);
  out += '\n';
  for (const auto& row : rows) {
    const auto& r = row.record;
    out += (r.pos ? std::string(pos_name(*r.pos)) : std::string("NGRAM")) + "\t" +
           (r.direction() == freq::Direction::rising ? "rising" : "falling") + "\t" + std::to_string(row.rank) + "\t" +
           r.key + "\t" + std::to_string(r.count_t1) + "\t" + std::to_string(r.count_t2) + "\t" + num(r.freq_t1_pm) +
           "\t" + num(r.freq_t2_pm) + "\t" + num(r.ll) + "\t" + num(r.signed_ll) + "\t" + num(r.ratio) + "\t" +
           (r.significant ? "1" : "0") + "\t" + num(r.nd_t1) + "\t" + num(r.nd_t2) + "\t" + num(r.delta_nd) + "\t" +
           num(r.u_stat) + "\t" + num(r.p_value) + "\t" + (r.overlap_llm ? "1" : "0") + "\n";
  }
  return out;
}

inline std::vector<ShiftRow> shift_from_tsv(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (lines.empty() || text::trim(lines[0]) != kShiftHeader)
    throw Error(Errc::SchemaMismatch, "shift table header does not match", 1);
  std::vector<ShiftRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 18) throw Error(Errc::SchemaMismatch, "shift row needs 18 fields", i + 1);
    ShiftRow row;
    auto& r = row.record;
    if (f[0] != "NGRAM") {
      r.pos = coarse_pos(f[0]);
      if (!r.pos) throw Error(Errc::SchemaMismatch, "unknown POS '" + std::string(f[0]) + "'", i + 1);
    }
    row.rank = static_cast<std::size_t>(parse_num(f[2], i + 1, "rank"));
    r.key = std::string(f[3]);
    r.count_t1 = static_cast<std::uint64_t>(parse_num(f[4], i + 1, "count_t1"));
    r.count_t2 = static_cast<std::uint64_t>(parse_num(f[5], i + 1, "count_t2"));
    r.freq_t1_pm = parse_num(f[6], i + 1, "Freq_t1");
    r.freq_t2_pm = parse_num(f[7], i + 1, "Freq_t2");
    r.ll = parse_num(f[8], i + 1, "LL");
    r.signed_ll = parse_num(f[9], i + 1, "signed_LL");
    r.ratio = parse_num(f[10], i + 1, "ratio");
    r.significant = f[11] == "1";
    r.nd_t1 = parse_opt(f[12], i + 1, "ND_t1");
    r.nd_t2 = parse_opt(f[13], i + 1, "ND_t2");
    r.delta_nd = parse_opt(f[14], i + 1, "ΔND");
    r.u_stat = parse_opt(f[15], i + 1, "U");
    r.p_value = parse_opt(f[16], i + 1, "p");
    r.overlap_llm = f[17] == "1";
    out.push_back(std::move(row));
  }
  return out;
}

inline ojson shift_to_json(const std::vector<ShiftRow>& rows) {
  auto arr = ojson::array();
  for (const auto& row : rows) {
    const auto& r = row.record;
    ojson j;
    j["target"] = r.key;
    j["pos"] = r.pos ? std::string(pos_name(*r.pos)) : std::string("NGRAM");
    j["direction"] = r.direction() == freq::Direction::rising ? "rising" : "falling";
    j["rank"] = row.rank;
    j["count_t1"] = r.count_t1;
    j["count_t2"] = r.count_t2;
    j["freq_t1"] = r.freq_t1_pm;
    j["freq_t2"] = r.freq_t2_pm;
    j["ll"] = r.ll;
    j["signed_ll"] = r.signed_ll;
    j["ratio"] = std::isfinite(r.ratio) ? ojson(r.ratio) : ojson(num(r.ratio));
    j["significant"] = r.significant;
    j["nd_t1"] = r.nd_t1 ? ojson(*r.nd_t1) : ojson();
    j["nd_t2"] = r.nd_t2 ? ojson(*r.nd_t2) : ojson();
    j["delta_nd"] = r.delta_nd ? ojson(*r.delta_nd) : ojson();
    j["u"] = r.u_stat ? ojson(*r.u_stat) : ojson();
    j["p"] = r.p_value ? ojson(*r.p_value) : ojson();
    j["overlap"] = r.overlap_llm;
    arr.push_back(std::move(j));
  }
  return arr;
}

// Density.

inline std::string density_to_tsv(const std::vector<embed::DensityRecord>& recs) {
  std::string out = "Target\tND_t1\tND_t2\tΔND\tU\tp\truns_t1\truns_t2\n";
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
    return s;
  };
  for (const auto& r : recs)
    out += r.target + "\t" + num(r.nd_t1) + "\t" + num(r.nd_t2) + "\t" + num(r.delta_nd) + "\t" + num(r.u_stat) + "\t" +
           num(r.p_value) + "\t" + join(r.run_nd_t1) + "\t" + join(r.run_nd_t2) + "\n";
  return out;
}

// Token clusters.

inline std::string profiles_to_tsv(const std::vector<cluster::ClusterProfile>& profiles) {
  std::string out = "cluster\tsize\tcount_t1\tcount_t2\tpct_t1\tpct_t2\tlabel\n";
  for (const auto& p : profiles) {
    char label[64];
    std::snprintf(label, sizeof label, "%.0f%% t1 vs. %.0f%% t2", p.pct_t1, p.pct_t2);
    out += std::to_string(p.cluster_id) + "\t" + std::to_string(p.size) + "\t" + std::to_string(p.count_t1) + "\t" +
           std::to_string(p.count_t2) + "\t" + num(p.pct_t1) + "\t" + num(p.pct_t2) + "\t" + label + "\n";
  }
  return out;
}

inline std::string exemplars_to_tsv(const std::vector<cluster::ClusterProfile>& profiles,
                                    const cluster::TokenEmbeddingSet& set) {
  std::string out = "cluster\trank\tdoc_id\tperiod\tsent_index\ttoken_index\tsentence_text\n";
  for (const auto& p : profiles)
    for (std::size_t i = 0; i < p.exemplars.size(); ++i) {
      const auto& ref = set.records[p.exemplars[i]].ref;
      out += std::to_string(p.cluster_id) + "\t" + std::to_string(i + 1) + "\t" + ref.doc_id + "\t" +
             std::string(period_name(ref.period)) + "\t" + std::to_string(ref.sent_index) + "\t" +
             std::to_string(ref.token_index) + "\t" + ref.sentence_text + "\n";
    }
  return out;
}

inline std::string assignments_to_tsv(const cluster::KMeansResult& km, const cluster::TokenEmbeddingSet& set) {
  std::string out = "record\tdoc_id\tperiod\tsent_index\ttoken_index\tcluster\n";
  for (std::size_t i = 0; i < km.assignments.size(); ++i) {
    const auto& ref = set.records[i].ref;
    out += std::to_string(i) + "\t" + ref.doc_id + "\t" + std::string(period_name(ref.period)) + "\t" +
           std::to_string(ref.sent_index) + "\t" + std::to_string(ref.token_index) + "\t" +
           std::to_string(km.assignments[i]) + "\n";
  }
  return out;
}

// Feature filtering.

inline std::string filter_to_tsv(const features::FeatureMatrix& m, const features::FilterResult& f) {
  std::vector<std::string> status(m.cols(), "kept");
  std::vector<std::string> group(m.cols());
  std::vector<std::string> rep(m.cols());
  for (auto j : f.dropped_zero_variance) status[j] = "zero_variance";
  for (std::size_t g = 0; g < f.groups.size(); ++g)
    for (auto j : f.groups[g]) {
      group[j] = std::to_string(g);
      rep[j] = m.names[f.representative[g]];
      if (j != f.representative[g]) status[j] = "correlated";
    }
  std::string out = "feature\tfamily\tstatus\tcorrelation_group\trepresentative\n";
  for (std::size_t j = 0; j < m.cols(); ++j)
    out += m.names[j] + "\t" + features::feature_family(m.names[j]) + "\t" + status[j] + "\t" + group[j] + "\t" +
           rep[j] + "\n";
  return out;
}

// Regression report.

/// One odds-ratio row as consumed by the forest plot.
struct ForestRecord {
  std::string name;
  std::string group;
  double odds_ratio = 1.0;
  double ci_lo = 1.0;
  double ci_hi = 1.0;
  std::string dataset;
};

inline ojson stability_json(const regress::StabilityReport& s) {
  ojson j;
  j["mean_auc"] = s.mean_auc;
  j["sd_auc"] = s.sd_auc;
  j["bootstrap_lambda"] = s.bootstrap_lambda;
  j["bootstrap_alpha"] = s.bootstrap_alpha;
  j["bootstrap_failures"] = s.bootstrap_failures;
  auto folds = ojson::array();
  for (const auto& f : s.folds) {
    ojson e;
    e["fold"] = f.fold;
    e["lambda"] = f.lambda;
    e["alpha"] = f.alpha;
    e["inner_auc"] = f.inner_auc;
    e["auc"] = f.auc;
    e["mcfadden_r2"] = f.mcfadden_r2;
    e["nonzero"] = f.nonzero;
    folds.push_back(std::move(e));
  }
  j["folds"] = std::move(folds);
  auto feats = ojson::array();
  for (const auto& f : s.features) {
    ojson e;
    e["name"] = f.name;
    e["fold_coefs"] = f.fold_coefs;
    e["selected_in_all_folds"] = f.selected_in_all_folds;
    e["sign_consistent"] = f.sign_consistent;
    e["mean_odds_change_pct"] = f.mean_odds_change_pct;
    e["effect_large_enough"] = f.effect_large_enough;
    e["ci_lo"] = f.ci.lo;
    e["ci_hi"] = f.ci.hi;
    e["ci_excludes_zero"] = f.ci_excludes_zero;
    e["final_selected"] = f.final_selected;
    feats.push_back(std::move(e));
  }
  j["features"] = std::move(feats);
  return j;
}

inline ojson refit_json(const regress::RegressionReport& r, const std::string& dataset) {
  ojson j;
  j["n"] = r.n;
  j["intercept"] = r.intercept;
  j["auc"] = r.auc;
  j["mcfadden_r2"] = r.mcfadden_r2;
  j["log_likelihood"] = r.log_likelihood;
  j["null_log_likelihood"] = r.null_log_likelihood;
  j["bootstrap_failures"] = r.bootstrap_failures;
  auto arr = ojson::array();
  for (const auto& c : r.coefficients) {
    ojson e;
    e["name"] = c.name;
    e["group"] = features::feature_family(c.name);
    e["odds_ratio"] = c.odds_ratio;
    e["ci_lo"] = c.ci_lo;
    e["ci_hi"] = c.ci_hi;
    e["dataset"] = dataset;
    e["coef"] = c.coef;
    e["std_error"] = c.std_error;
    e["wald_lo"] = c.wald_lo;
    e["wald_hi"] = c.wald_hi;
    e["ci_method"] = "bootstrap_percentile";
    arr.push_back(std::move(e));
  }
  j["features"] = std::move(arr);
  return j;
}

inline ojson mixed_json(const regress::MixedResult& m, const std::vector<std::string>& names, const std::string& dataset,
                        double ci_level) {
  const double z = std::sqrt(2.0) * boost::math::erf_inv(ci_level);
  ojson j;
  j["intercept"] = m.intercept;
  j["intercept_sd"] = m.sd;
  j["intercept_variance"] = m.variance;
  j["log_likelihood"] = m.log_likelihood;
  j["marginal_r2"] = m.marginal_r2;
  j["conditional_r2"] = m.conditional_r2;
  j["groups"] = m.group_names.size();
  j["iterations"] = m.iterations;
  auto arr = ojson::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto b = m.beta[static_cast<Eigen::Index>(i)];
    auto se = m.std_errors[static_cast<Eigen::Index>(i)];
    ojson e;
    e["name"] = names[i];
    e["group"] = features::feature_family(names[i]);
    e["odds_ratio"] = std::exp(b);
    e["ci_lo"] = std::exp(b - z * se);
    e["ci_hi"] = std::exp(b + z * se);
    e["dataset"] = dataset;
    e["coef"] = b;
    e["std_error"] = se;
    e["ci_method"] = "wald";
    arr.push_back(std::move(e));
  }
  j["features"] = std::move(arr);
  return j;
}

/// Forest records of a regression report: the pooled refit when present,
/// else the mixed model.
inline std::vector<ForestRecord> forest_records(const nlohmann::json& report) {
  const nlohmann::json* block = nullptr;
  if (report.contains("pooled") && report["pooled"].is_object() && report["pooled"].contains("refit") &&
      report["pooled"]["refit"].is_object())
    block = &report["pooled"]["refit"];
  else if (report.contains("mixed") && report["mixed"].is_object())
    block = &report["mixed"];
  if (!block || !block->contains("features") || !(*block)["features"].is_array())
    throw Error(Errc::SchemaMismatch, "regression report has no feature records");
  std::vector<ForestRecord> out;
  for (const auto& e : (*block)["features"]) {
    for (const char* k : {"name", "group", "odds_ratio", "ci_lo", "ci_hi", "dataset"})
      if (!e.contains(k)) throw Error(Errc::SchemaMismatch, std::string("feature record lacks '") + k + "'");
    if (!e["odds_ratio"].is_number() || !e["ci_lo"].is_number() || !e["ci_hi"].is_number())
      throw Error(Errc::SchemaMismatch, "odds ratio fields must be numbers");
    out.push_back({e["name"].get<std::string>(), e["group"].get<std::string>(), e["odds_ratio"].get<double>(),
                   e["ci_lo"].get<double>(), e["ci_hi"].get<double>(), e["dataset"].get<std::string>()});
  }
  return out;
}

// Preference distribution.

inline std::vector<annot::PreferenceCounts> distribution_from_tsv(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (lines.empty() ||
      text::trim(lines[0]) != "dimension\tstrongly_human\tslightly_human\tslightly_llm\tstrongly_llm\ttotal")
    throw Error(Errc::SchemaMismatch, "preference distribution header does not match", 1);
  std::vector<annot::PreferenceCounts> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 6) throw Error(Errc::SchemaMismatch, "distribution row needs 6 fields", i + 1);
    annot::PreferenceCounts c;
    c.dimension = std::string(f[0]);
    for (std::size_t k = 0; k < 4; ++k) {
      double v = parse_num(f[k + 1], i + 1, "count");
      if (v < 0 || v != std::floor(v)) throw Error(Errc::SchemaMismatch, "counts must be non-negative integers", i + 1);
      c.counts[k] = static_cast<std::size_t>(v);
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lexshift::cli::report
