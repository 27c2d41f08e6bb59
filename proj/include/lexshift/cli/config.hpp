#pragma once

// Plain `key = value` run configuration with typed access and override by
// command-line flags.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/corpus.hpp"

namespace lexshift::cli {

enum class ValueType { string, path, integer, real, boolean, list };

struct ParamSpec {
  std::string_view key;
  ValueType type;
  std::string_view default_value;
  std::string_view basis;  // where the default comes from
};

inline const std::vector<ParamSpec>& param_specs() {
  using V = ValueType;
  static const std::vector<ParamSpec> specs{
      // inputs and outputs
      {"corpus", V::path, "", "input: annotated corpus, periods T1/T2"},
      {"contrast_corpus", V::path, "", "input: original (T1) vs LLM-paraphrased (T2) corpus"},
      {"features_corpus", V::path, "", "input: corpus for the feature stage, defaults to corpus"},
      {"out", V::path, "out", "invented: output directory"},
      {"seed", V::integer, "42", "invented: master seed"},
      {"threads", V::integer, "0", "invented: 0 = LEXSHIFT_THREADS or hardware concurrency"},
      // segmentation and vocabulary
      {"paragraph_window", V::integer, "5", "published: non-overlapping windows of five sentences"},
      {"min_lemma_length", V::integer, "3", "invented: shortest content lemma kept"},
      // frequency shift
      {"ll_threshold", V::real, "15.13", "published: LL critical value for p < 0.0001"},
      {"top_k", V::integer, "10", "published: top 10 targets per direction and POS"},
      {"overlap_k", V::integer, "100", "published: top 100 contrast terms for overlap marking"},
      {"ngram_n", V::integer, "5", "published: 5-gram analysis"},
      {"ngram_min_freq", V::integer, "10", "invented: minimum n-gram count per period"},
      // embeddings
      {"sgns_dim", V::integer, "100", "published: vector dimension 100"},
      {"sgns_window", V::integer, "5", "published: window size 5"},
      {"sgns_min_count", V::integer, "10", "published: minimum frequency 10"},
      {"sgns_negative", V::integer, "5", "implementation default: 5 negative samples"},
      {"sgns_epochs", V::integer, "5", "implementation default: 5 epochs"},
      {"sgns_lr", V::real, "0.025", "implementation default: initial learning rate 0.025"},
      {"sgns_subsample", V::real, "0.001", "implementation default: subsampling threshold 1e-3"},
      {"sgns_runs", V::integer, "3", "published: three training runs per period"},
      {"deterministic", V::boolean, "false", "invented: single-threaded bit-reproducible training"},
      {"nd_k", V::integer, "100", "published: 100 nearest neighbors"},
      {"nd_alpha", V::real, "0.05", "published: Mann-Whitney U at the 0.05 level"},
      // token clustering
      {"cluster_targets", V::list, "", "input: lemma_POS targets to cluster"},
      {"embeddings_dir", V::path, "", "input: directory of <target>.tkem files"},
      {"cluster_cap", V::integer, "1000", "published: at most 1000 sentences per period"},
      {"cluster_k", V::integer, "8", "published: k = 8"},
      {"cluster_restarts", V::integer, "10", "invented: k-means restarts"},
      {"cluster_max_iter", V::integer, "300", "invented: Lloyd iteration cap"},
      {"cluster_tol", V::real, "0.0001", "invented: centroid shift tolerance"},
      {"cluster_exemplars", V::integer, "4", "invented: exemplar sentences per cluster"},
      // features
      {"features", V::list, "", "invented: feature subset, empty = full registry"},
      {"r_max", V::real, "0.7", "published: correlation cutoff 0.7"},
      {"normalize_counts", V::boolean, "true", "invented: count features per 1000 tokens"},
      // regression
      {"feature_matrix", V::path, "", "input: feature TSV, defaults to the features stage output"},
      {"outcome", V::string, "period", "published: binary period (or human/LLM) outcome"},
      {"regress_mode", V::string, "pooled", "invented: pooled, mixed or both"},
      {"dataset_tag", V::string, "original", "invented: dataset label in the report"},
      {"inner_k", V::integer, "5", "published: 5 inner folds"},
      {"outer_k", V::integer, "10", "published: 10 outer folds"},
      {"enet_alpha", V::list, "0.5", "invented: elastic-net mixing grid"},
      {"n_lambda", V::integer, "50", "invented: lambda grid size"},
      {"lambda_decades", V::real, "4", "invented: lambda grid span in decades"},
      {"min_odds_change", V::real, "0.05", "published: minimum 5% change in odds"},
      {"n_boot", V::integer, "200", "invented: stability bootstrap replicates"},
      {"refit_boot", V::integer, "1000", "invented: refit bootstrap replicates"},
      {"ci_level", V::real, "0.95", "published: 95% confidence intervals"},
      {"bootstrap_groups", V::boolean, "false", "invented: resample whole groups (paired design)"},
      // annotation
      {"ratings", V::path, "", "input: ratings CSV"},
      {"assignments", V::path, "", "input: A/B assignment CSV"},
      {"annot_unit", V::string, "pair", "invented: pair or pair_rater test unit"},
      {"pair_features", V::path, "", "input: feature TSV of candidate pairs"},
      {"pair_embeddings", V::path, "", "input: SENT file of candidate pairs"},
      {"pair_top_n", V::integer, "300", "published: 300 most distant pairs"},
      // plots
      {"contrast_report", V::path, "", "input: second regression report for the forest plot"},
      {"plots", V::list, "scatter_ll_nd,odds_forest,preference_stack", "invented: plot kinds"},
  };
  return specs;
}

inline const ParamSpec* find_spec(std::string_view key) {
  for (const auto& s : param_specs())
    if (s.key == key) return &s;
  return nullptr;
}

/// `lexicon.<name>` keys name lexicon files and are open-ended.
inline bool is_lexicon_key(std::string_view key) { return key.starts_with("lexicon.") && key.size() > 8; }

enum class Source { default_value, file, flag };

inline std::string_view source_name(Source s) {
  switch (s) {
    case Source::default_value: return "default";
    case Source::file: return "file";
    case Source::flag: return "flag";
  }
  return "default";
}

class Config {
 public:
  Config() = default;

  /// Parses `key = value` lines; `#` starts a comment line. Unknown keys,
  /// duplicates and lines without `=` are rejected.
  static Config parse(std::string_view content) {
    Config c;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    for (auto raw : text::split(content, '\n')) {
      ++line_no;
      auto line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw Error(Errc::Config, "expected key = value", line_no);
      std::string key(text::trim(line.substr(0, eq)));
      std::string value(text::trim(line.substr(eq + 1)));
      if (key.empty()) throw Error(Errc::Config, "empty key", line_no);
      if (!seen.insert(key).second) throw Error(Errc::Config, "duplicate key '" + key + "'", line_no);
      c.set(key, value, Source::file);
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
      throw Error(Errc::MissingResource, "config file " + path.string() + " does not exist");
    auto c = parse(read_file(path));
    c.origin_ = path.parent_path();
    return c;
  }

  /// Rebuilds the parameter set recorded in a run manifest, keeping each
  /// value's recorded source.
  static Config from_manifest(const nlohmann::json& manifest) {
    Config c;
    if (!manifest.contains("parameters") || !manifest["parameters"].is_array())
      throw Error(Errc::SchemaMismatch, "manifest has no parameter list");
    for (const auto& p : manifest["parameters"]) {
      if (!p.contains("key") || !p.contains("value")) throw Error(Errc::SchemaMismatch, "manifest parameter lacks key/value");
      Source src = Source::file;
      if (p.contains("source") && p["source"].is_string()) {
        auto name = p["source"].get<std::string>();
        src = name == "flag" ? Source::flag : name == "default" ? Source::default_value : Source::file;
      }
      c.set(p["key"].get<std::string>(), p["value"].get<std::string>(), src);
    }
    if (manifest.contains("config_dir") && manifest["config_dir"].is_string())
      c.origin_ = manifest["config_dir"].get<std::string>();
    return c;
  }

  void set(const std::string& key, std::string value, Source source = Source::flag) {
    if (!find_spec(key) && !is_lexicon_key(key)) throw Error(Errc::Config, "unknown key '" + key + "'");
    values_[key] = {std::move(value), source};
    check_type(key);
  }

  /// Applies a `key=value` override string.
  void set_override(std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::Config, "override '" + std::string(assignment) + "' lacks '='");
    set(std::string(text::trim(assignment.substr(0, eq))), std::string(text::trim(assignment.substr(eq + 1))));
  }

  bool is_set(std::string_view key) const {
    auto it = values_.find(std::string(key));
    return it != values_.end() && !it->second.value.empty();
  }

  /// Raw value, falling back to the registered default. Marks the key used.
  std::string raw(std::string_view key) const {
    std::string k(key);
    used_.insert(k);
    if (auto it = values_.find(k); it != values_.end()) return it->second.value;
    if (auto* s = find_spec(key)) return std::string(s->default_value);
    throw Error(Errc::Config, "unknown key '" + k + "'");
  }

  std::string str(std::string_view key) const { return raw(key); }

  /// Path value. Relative paths from the config file resolve against its
  /// directory; flag values resolve against the working directory.
  std::filesystem::path path(std::string_view key) const {
    auto v = raw(key);
    if (v.empty()) return {};
    std::filesystem::path p(v);
    auto it = values_.find(std::string(key));
    bool from_flag = it != values_.end() && it->second.source == Source::flag;
    if (p.is_relative() && !origin_.empty() && !from_flag) p = origin_ / p;
    return p;
  }

  std::int64_t integer(std::string_view key) const {
    auto v = raw(key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw Error(Errc::Config, std::string(key) + ": '" + v + "' is not an integer");
    return out;
  }

  std::size_t count(std::string_view key) const {
    auto v = integer(key);
    if (v < 0) throw Error(Errc::Config, std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  }

  std::size_t positive(std::string_view key) const {
    auto v = integer(key);
    if (v < 1) throw Error(Errc::Config, std::string(key) + " must be >= 1");
    return static_cast<std::size_t>(v);
  }

  double real(std::string_view key) const {
    auto v = raw(key);
    double out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
      throw Error(Errc::Config, std::string(key) + ": '" + v + "' is not a finite number");
    return out;
  }

  bool flag(std::string_view key) const {
    auto v = text::lower(raw(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(Errc::Config, std::string(key) + ": '" + v + "' is not a boolean");
  }

  std::vector<std::string> list(std::string_view key) const {
    std::vector<std::string> out;
    auto v = raw(key);
    for (auto part : text::split(v, ','))
      if (auto t = text::trim(part); !t.empty()) out.emplace_back(t);
    return out;
  }

  std::vector<double> real_list(std::string_view key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) {
      double d = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
      if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(d))
        throw Error(Errc::Config, std::string(key) + ": '" + s + "' is not a finite number");
      out.push_back(d);
    }
    return out;
  }

  std::uint64_t seed() const {
    auto v = integer("seed");
    if (v < 0) throw Error(Errc::Config, "seed must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  unsigned threads() const {
    auto v = count("threads");
    return v == 0 ? default_threads() : static_cast<unsigned>(v);
  }

  /// Lexicon name -> path for every `lexicon.<name>` key.
  std::map<std::string, std::filesystem::path> lexicons() const {
    std::map<std::string, std::filesystem::path> out;
    for (const auto& [k, v] : values_)
      if (is_lexicon_key(k)) out[k.substr(8)] = path(k);
    return out;
  }

  const std::filesystem::path& origin() const { return origin_; }
  void set_origin(std::filesystem::path p) { origin_ = std::move(p); }

  /// Every parameter read so far, sorted by key, with source and basis.
  nlohmann::ordered_json used_parameters() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& k : used_) {
      auto it = values_.find(k);
      const auto* spec = find_spec(k);
      nlohmann::ordered_json e;
      e["key"] = k;
      e["value"] = it != values_.end() ? it->second.value : std::string(spec ? spec->default_value : "");
      e["source"] = std::string(source_name(it != values_.end() ? it->second.source : Source::default_value));
      e["basis"] = spec ? std::string(spec->basis) : std::string("input: lexicon file");
      arr.push_back(std::move(e));
    }
    return arr;
  }

  void clear_used() const { used_.clear(); }

 private:
  struct Entry {
    std::string value;
    Source source = Source::default_value;
  };

  void check_type(const std::string& key) const {
    const auto* spec = find_spec(key);
    if (!spec) return;
    auto saved = used_;
    switch (spec->type) {
      case ValueType::integer: integer(key); break;
      case ValueType::real: real(key); break;
      case ValueType::boolean: flag(key); break;
      default: break;
    }
    used_ = std::move(saved);
  }

  std::map<std::string, Entry> values_;
  mutable std::set<std::string> used_;
  std::filesystem::path origin_;
};

}  // namespace lexshift::cli
