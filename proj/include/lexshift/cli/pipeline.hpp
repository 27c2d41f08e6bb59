#pragma once

// Stage orchestration: fail-fast validation, per-stage artifacts committed
// atomically, run manifests and the output-directory lock.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>

#include "lexshift/annot.hpp"
#include "lexshift/cli/config.hpp"
#include "lexshift/cli/plot.hpp"
#include "lexshift/cli/report.hpp"
#include "lexshift/common/error.hpp"
#include "lexshift/common/random.hpp"
#include "lexshift/corpus.hpp"
#include "lexshift/embeddings.hpp"
#include "lexshift/features.hpp"
#include "lexshift/freqstats.hpp"
#include "lexshift/regress.hpp"
#include "lexshift/tokenclust.hpp"

#ifndef LEXSHIFT_VERSION
#define LEXSHIFT_VERSION "0.0.0"
#endif

namespace lexshift::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum class Stage { ingest, shift, embed_train, density, cluster, features, regress, annot, plot, all };

inline constexpr Stage kStageOrder[] = {Stage::ingest,   Stage::shift,   Stage::embed_train,
                                        Stage::density,  Stage::cluster, Stage::features,
                                        Stage::regress,  Stage::annot,   Stage::plot};

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::shift: return "shift";
    case Stage::embed_train: return "embed-train";
    case Stage::density: return "density";
    case Stage::cluster: return "cluster";
    case Stage::features: return "features";
    case Stage::regress: return "regress";
    case Stage::annot: return "annot";
    case Stage::plot: return "plot";
    case Stage::all: return "all";
  }
  return "";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : kStageOrder)
    if (stage_name(st) == s) return st;
  if (s == "all") return Stage::all;
  return std::nullopt;
}

/// 64-bit FNV-1a, hex encoded; content fingerprints for the manifest.
inline std::string fingerprint(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Exclusive ownership of an output directory for the lifetime of the
/// object.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".lexshift.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f) throw Error(Errc::Io, "output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

/// Files produced by one stage, keyed by path relative to the output directory.
struct Artifacts {
  std::map<std::string, std::string> files;
  void put(std::string rel, std::string content) { files[std::move(rel)] = std::move(content); }
};

struct InputRecord {
  std::string role;
  std::string path;
  std::string fingerprint;
  std::size_t bytes = 0;
};

inline void write_atomic(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::Io, "cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(Errc::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

class Pipeline {
 public:
  explicit Pipeline(Config cfg) : cfg_(std::move(cfg)) {}

  /// Stages executed for a subcommand, in order.
  std::vector<Stage> plan(Stage s) const {
    if (s != Stage::all) return {s};
    std::vector<Stage> out;
    for (auto st : kStageOrder) {
      if (st == Stage::cluster && cfg_.list("cluster_targets").empty()) continue;
      if (st == Stage::annot && !cfg_.is_set("ratings")) continue;
      if ((st == Stage::features || st == Stage::regress) && !has_feature_input()) continue;
      out.push_back(st);
    }
    return out;
  }

  /// Checks every parameter and input a run needs before anything is written.
  void validate(Stage s) const {
    auto stages = plan(s);
    std::set<Stage> planned(stages.begin(), stages.end());
    for (auto st : stages) validate_stage(st, planned);
    cfg_.clear_used();
  }

  /// Validates, locks the output directory and runs the planned stages.
  /// Returns the relative paths written.
  std::vector<std::string> run(Stage s) {
    validate(s);
    const fs::path out = out_dir();
    OutputLock lock(out);
    std::vector<std::string> written;
    auto stages = plan(s);
    std::set<Stage> planned(stages.begin(), stages.end());
    for (auto st : stages) {
      cfg_.clear_used();
      inputs_.clear();
      (void)cfg_.path("out");
      auto art = run_stage(st, planned);
      for (const auto& [rel, content] : art.files) {
        write_atomic(out / rel, content);
        written.push_back(rel);
      }
      auto manifest = make_manifest(st, art);
      std::string rel = "manifests/" + std::string(stage_name(st)) + ".json";
      write_atomic(out / rel, manifest.dump(2) + "\n");
      written.push_back(rel);
    }
    return written;
  }

  fs::path out_dir() const { return cfg_.path("out"); }
  const Config& config() const { return cfg_; }

 private:
  // Inputs.

  bool has_feature_input() const { return cfg_.is_set("feature_matrix") || has_features_corpus(); }
  bool has_features_corpus() const {
    return cfg_.is_set("features_corpus") || cfg_.is_set("corpus");
  }

  fs::path stage_file(std::string_view rel) const { return out_dir() / std::string(rel); }

  std::string read_input(const std::string& role, const fs::path& p) {
    auto content = read_file(p);
    inputs_.push_back({role, p.generic_string(), fingerprint(content), content.size()});
    return content;
  }

  AnnotatedCorpus load(const std::string& role, const fs::path& p) {
    return parse_corpus(read_input(role, p), cfg_.threads());
  }

  static void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) throw Error(Errc::Config, what + " is not configured");
    if (!fs::is_regular_file(p)) throw Error(Errc::MissingResource, what + " " + p.string() + " does not exist");
  }

  /// A file produced by an earlier stage: fine when that stage is planned,
  /// else it has to exist already.
  void require_stage_file(std::string_view rel, Stage producer, const std::set<Stage>& planned) const {
    if (planned.count(producer)) return;
    auto p = stage_file(rel);
    if (!fs::is_regular_file(p))
      throw Error(Errc::MissingResource, std::string(rel) + " not found in " + out_dir().string() + "; run '" +
                                             std::string(stage_name(producer)) + "' first");
  }

  fs::path features_corpus_path() const {
    return cfg_.is_set("features_corpus") ? cfg_.path("features_corpus") : cfg_.path("corpus");
  }

  fs::path feature_matrix_path() const {
    return cfg_.is_set("feature_matrix") ? cfg_.path("feature_matrix") : stage_file("features/matrix.tsv");
  }

  void validate_stage(Stage st, const std::set<Stage>& planned) const {
    (void)cfg_.seed();
    (void)cfg_.threads();
    if (cfg_.path("out").empty()) throw Error(Errc::Config, "out is empty");
    switch (st) {
      case Stage::ingest:
        require_file(cfg_.path("corpus"), "corpus");
        if (cfg_.is_set("contrast_corpus")) require_file(cfg_.path("contrast_corpus"), "contrast_corpus");
        (void)cfg_.count("paragraph_window");
        (void)cfg_.count("min_lemma_length");
        break;
      case Stage::shift:
        require_file(cfg_.path("corpus"), "corpus");
        if (cfg_.is_set("contrast_corpus")) require_file(cfg_.path("contrast_corpus"), "contrast_corpus");
        (void)cfg_.real("ll_threshold");
        (void)cfg_.positive("top_k");
        (void)cfg_.positive("overlap_k");
        if (cfg_.positive("ngram_n") < 2) throw Error(Errc::Config, "ngram_n must be >= 2");
        (void)cfg_.count("ngram_min_freq");
        (void)cfg_.count("min_lemma_length");
        break;
      case Stage::embed_train:
        require_file(cfg_.path("corpus"), "corpus");
        (void)sgns_params();
        (void)cfg_.positive("sgns_runs");
        (void)cfg_.flag("deterministic");
        break;
      case Stage::density:
        require_stage_file("shift/shift.tsv", Stage::shift, planned);
        for (std::size_t r = 0; r < cfg_.positive("sgns_runs"); ++r)
          for (auto p : {Period::T1, Period::T2}) require_stage_file(model_rel(p, r), Stage::embed_train, planned);
        (void)cfg_.positive("nd_k");
        (void)cfg_.real("nd_alpha");
        break;
      case Stage::cluster: {
        require_file(cfg_.path("corpus"), "corpus");
        auto targets = cfg_.list("cluster_targets");
        if (targets.empty()) throw Error(Errc::Config, "cluster_targets is empty");
        for (const auto& t : targets) {
          if (!parse_vocab_key(t)) throw Error(Errc::Config, "cluster target '" + t + "' is not lemma_POS");
          if (cfg_.is_set("embeddings_dir")) require_file(cfg_.path("embeddings_dir") / (t + ".tkem"), "embeddings for " + t);
        }
        (void)kmeans_params(0);
        (void)cfg_.positive("cluster_cap");
        (void)cfg_.count("cluster_exemplars");
        break;
      }
      case Stage::features: {
        require_file(features_corpus_path(), "features corpus");
        auto names = feature_names();
        auto lex = cfg_.lexicons();
        for (const auto& r : features::required_resources(names)) {
          auto it = lex.find(r);
          if (it == lex.end()) throw Error(Errc::MissingResource, "feature set needs lexicon." + r);
          require_file(it->second, "lexicon." + r);
        }
        for (const auto& [name, p] : lex) require_file(p, "lexicon." + name);
        (void)cfg_.positive("paragraph_window");
        (void)cfg_.real("r_max");
        (void)cfg_.flag("normalize_counts");
        break;
      }
      case Stage::regress: {
        if (cfg_.is_set("feature_matrix"))
          require_file(cfg_.path("feature_matrix"), "feature_matrix");
        else
          require_stage_file("features/matrix.tsv", Stage::features, planned);
        auto mode = cfg_.str("regress_mode");
        if (mode != "pooled" && mode != "mixed" && mode != "both")
          throw Error(Errc::Config, "regress_mode must be pooled, mixed or both");
        auto outcome = cfg_.str("outcome");
        if (outcome != "period" && outcome != "version")
          throw Error(Errc::Config, "outcome must be 'period' or 'version' (the matrix outcome column)");
        (void)stability_config();
        (void)cfg_.count("refit_boot");
        (void)cfg_.real("r_max");
        break;
      }
      case Stage::annot: {
        require_file(cfg_.path("ratings"), "ratings");
        if (cfg_.is_set("assignments")) require_file(cfg_.path("assignments"), "assignments");
        (void)annot_unit();
        if (cfg_.is_set("pair_features") || cfg_.is_set("pair_embeddings")) {
          require_file(cfg_.path("pair_features"), "pair_features");
          require_file(cfg_.path("pair_embeddings"), "pair_embeddings");
          (void)cfg_.count("pair_top_n");
        }
        break;
      }
      case Stage::plot: {
        auto kinds = plot_kinds(planned);
        for (const auto& k : kinds) {
          if (k == "scatter_ll_nd")
            require_stage_file("density/shift_density.tsv", Stage::density, planned);
          else if (k == "odds_forest") {
            require_stage_file("regress/report.json", Stage::regress, planned);
            if (cfg_.is_set("contrast_report")) require_file(cfg_.path("contrast_report"), "contrast_report");
          } else if (k == "preference_stack")
            require_stage_file("annot/distribution.tsv", Stage::annot, planned);
          else
            throw Error(Errc::Config, "unknown plot kind '" + k + "'");
        }
        (void)cfg_.real("nd_alpha");
        break;
      }
      case Stage::all: break;
    }
  }

  // Typed parameter bundles.

  embed::SgnsParams sgns_params() const {
    embed::SgnsParams p;
    p.dim = cfg_.positive("sgns_dim");
    p.window = cfg_.positive("sgns_window");
    p.negative = cfg_.count("sgns_negative");
    p.min_count = cfg_.positive("sgns_min_count");
    p.epochs = cfg_.positive("sgns_epochs");
    p.initial_lr = cfg_.real("sgns_lr");
    p.subsample = cfg_.real("sgns_subsample");
    p.threads = cfg_.threads();
    if (p.initial_lr <= 0) throw Error(Errc::Config, "sgns_lr must be > 0");
    return p;
  }

  cluster::KMeansParams kmeans_params(std::uint64_t seed) const {
    cluster::KMeansParams p;
    p.k = cfg_.positive("cluster_k");
    p.restarts = cfg_.positive("cluster_restarts");
    p.max_iter = cfg_.positive("cluster_max_iter");
    p.tol = cfg_.real("cluster_tol");
    p.seed = seed;
    p.threads = cfg_.threads();
    return p;
  }

  regress::StabilityConfig stability_config() const {
    regress::StabilityConfig c;
    c.inner_k = cfg_.positive("inner_k");
    c.outer_k = cfg_.positive("outer_k");
    c.alphas = cfg_.real_list("enet_alpha");
    if (c.alphas.empty()) throw Error(Errc::Config, "enet_alpha is empty");
    for (double a : c.alphas)
      if (a < 0 || a > 1) throw Error(Errc::Config, "enet_alpha values must lie in [0, 1]");
    c.n_lambda = cfg_.positive("n_lambda");
    c.lambda_decades = cfg_.real("lambda_decades");
    c.min_odds_change = cfg_.real("min_odds_change");
    c.n_boot = cfg_.count("n_boot");
    c.ci_level = cfg_.real("ci_level");
    if (!(c.ci_level > 0 && c.ci_level < 1)) throw Error(Errc::Config, "ci_level must lie in (0, 1)");
    c.seed = cfg_.seed();
    c.threads = cfg_.threads();
    return c;
  }

  annot::Unit annot_unit() const {
    auto u = cfg_.str("annot_unit");
    if (u == "pair") return annot::Unit::pair;
    if (u == "pair_rater") return annot::Unit::pair_rater;
    throw Error(Errc::Config, "annot_unit must be pair or pair_rater");
  }

  std::vector<std::string> feature_names() const {
    auto names = cfg_.list("features");
    if (names.empty()) return features::default_feature_names();
    for (const auto& n : names) (void)features::feature_def(n);
    return names;
  }

  std::vector<std::string> plot_kinds(const std::set<Stage>& planned) const {
    auto kinds = cfg_.list("plots");
    if (planned.size() <= 1) return kinds;
    // Inside a multi-stage run only plot what the run produced.
    std::vector<std::string> out;
    for (const auto& k : kinds) {
      if (k == "scatter_ll_nd" && !planned.count(Stage::density)) continue;
      if (k == "odds_forest" && !planned.count(Stage::regress)) continue;
      if (k == "preference_stack" && !planned.count(Stage::annot)) continue;
      out.push_back(k);
    }
    return out;
  }

  static std::string model_rel(Period p, std::size_t run) {
    return "embed/models/" + std::string(p == Period::T1 ? "t1" : "t2") + "_run" + std::to_string(run) + ".sgns";
  }

  // Stages.

  Artifacts run_stage(Stage st, const std::set<Stage>& planned) {
    switch (st) {
      case Stage::ingest: return ingest();
      case Stage::shift: return shift();
      case Stage::embed_train: return embed_train();
      case Stage::density: return density();
      case Stage::cluster: return cluster_stage();
      case Stage::features: return features_stage();
      case Stage::regress: return regress_stage();
      case Stage::annot: return annot_stage();
      case Stage::plot: return plot_stage(planned);
      case Stage::all: break;
    }
    return {};
  }

  Artifacts ingest() {
    Artifacts a;
    auto corpus = load("corpus", cfg_.path("corpus"));
    auto window = cfg_.positive("paragraph_window");
    auto min_len = cfg_.count("min_lemma_length");
    ojson stats;
    stats["corpus"] = report::corpus_stats_json(corpus.stats());
    a.put("ingest/vocab.tsv", vocab_to_tsv(build_shared_vocab(corpus, min_len, cfg_.threads())));
    a.put("ingest/paragraphs.tsv", report::paragraphs_to_tsv(segment_paragraphs(corpus, window)));
    if (cfg_.is_set("contrast_corpus")) {
      auto contrast = load("contrast_corpus", cfg_.path("contrast_corpus"));
      stats["contrast_corpus"] = report::corpus_stats_json(contrast.stats());
      a.put("ingest/contrast_vocab.tsv", vocab_to_tsv(build_shared_vocab(contrast, min_len, cfg_.threads())));
    }
    a.put("ingest/corpus_stats.json", stats.dump(2) + "\n");
    return a;
  }

  Artifacts shift() {
    Artifacts a;
    auto corpus = load("corpus", cfg_.path("corpus"));
    auto min_len = cfg_.count("min_lemma_length");
    double thr = cfg_.real("ll_threshold");
    auto top_k = cfg_.positive("top_k");
    auto ranking = freq::rank_shifts(build_shared_vocab(corpus, min_len, cfg_.threads()), corpus.stats(), top_k, thr);
    if (cfg_.is_set("contrast_corpus")) {
      auto contrast = load("contrast_corpus", cfg_.path("contrast_corpus"));
      auto k = cfg_.positive("overlap_k");
      auto cr = freq::rank_shifts(build_shared_vocab(contrast, min_len, cfg_.threads()), contrast.stats(), k, thr);
      freq::mark_overlap(ranking, cr, k);
      a.put("shift/contrast_shift.tsv", report::shift_to_tsv(report::flatten(cr)));
    }
    auto rows = report::flatten(ranking);
    a.put("shift/shift.tsv", report::shift_to_tsv(rows));
    a.put("shift/shift.json", report::shift_to_json(rows).dump(2) + "\n");

    auto ng = freq::extract_ngrams(corpus, cfg_.positive("ngram_n"), cfg_.count("ngram_min_freq"), thr, cfg_.threads());
    std::vector<freq::ShiftRecord> recs;
    for (auto& r : ng.records) recs.push_back(r.shift);
    a.put("shift/ngrams.tsv", report::shift_to_tsv(report::flatten(freq::top_shifts(std::move(recs), top_k))));
    ojson totals;
    totals["windows_t1"] = ng.windows_t1;
    totals["windows_t2"] = ng.windows_t2;
    totals["qualifying_ngrams"] = ng.records.size();
    a.put("shift/ngram_totals.json", totals.dump(2) + "\n");
    return a;
  }

  Artifacts embed_train() {
    Artifacts a;
    auto corpus = load("corpus", cfg_.path("corpus"));
    auto params = sgns_params();
    bool det = cfg_.flag("deterministic");
    auto runs = cfg_.positive("sgns_runs");
    auto seed = cfg_.seed();
    ojson summary = ojson::array();
    for (auto p : {Period::T1, Period::T2}) {
      auto stream = embed::token_stream(corpus, p);
      for (std::size_t r = 0; r < runs; ++r) {
        auto m = embed::train_sgns(stream, params, seed + r, det, p);
        ojson e;
        e["period"] = std::string(period_name(p));
        e["run"] = r;
        e["seed"] = seed + r;
        e["vocab"] = m.size();
        e["tokens"] = stream.tokens();
        summary.push_back(std::move(e));
        a.put(model_rel(p, r), embed::serialize_model(m));
      }
    }
    a.put("embed/models.json", summary.dump(2) + "\n");
    return a;
  }

  std::vector<embed::EmbeddingModel> load_models(Period p) {
    std::vector<embed::EmbeddingModel> out;
    for (std::size_t r = 0; r < cfg_.positive("sgns_runs"); ++r) {
      auto rel = model_rel(p, r);
      out.push_back(embed::deserialize_model(read_input("model", stage_file(rel))));
    }
    return out;
  }

  Artifacts density() {
    Artifacts a;
    auto rows = report::shift_from_tsv(read_input("shift_table", stage_file("shift/shift.tsv")));
    auto m1 = load_models(Period::T1), m2 = load_models(Period::T2);
    auto k = cfg_.positive("nd_k");
    std::vector<embed::DensityRecord> recs;
    std::string skipped = "Target\treason\n";
    std::map<std::string, embed::DensityRecord> by_target;
    for (auto& row : rows) {
      auto& r = row.record;
      if (!r.pos) continue;
      std::string target = r.unit();
      auto in_all = [&](const std::vector<embed::EmbeddingModel>& ms) {
        for (const auto& m : ms)
          if (!m.contains(target)) return false;
        return true;
      };
      if (!in_all(m1) || !in_all(m2)) {
        skipped += target + "\tout_of_vocabulary\n";
        continue;
      }
      auto it = by_target.find(target);
      if (it == by_target.end()) it = by_target.emplace(target, embed::delta_nd(m1, m2, target, k)).first;
      const auto& d = it->second;
      r.nd_t1 = d.nd_t1;
      r.nd_t2 = d.nd_t2;
      r.delta_nd = d.delta_nd;
      r.u_stat = d.u_stat;
      r.p_value = d.p_value;
    }
    for (auto& [t, d] : by_target) recs.push_back(d);
    a.put("density/density.tsv", report::density_to_tsv(recs));
    a.put("density/skipped.tsv", skipped);
    a.put("density/shift_density.tsv", report::shift_to_tsv(rows));

    std::vector<freq::ShiftRecord> flat;
    for (auto& row : rows) flat.push_back(row.record);
    ojson corr;
    try {
      auto rho = freq::signed_ll_nd_correlation(flat);
      corr["n"] = std::count_if(flat.begin(), flat.end(), [](const auto& r) { return r.delta_nd.has_value(); });
      corr["spearman_rho"] = rho.statistic;
      corr["p_value"] = rho.p_value;
    } catch (const Error& e) {
      corr["spearman_rho"] = nullptr;
      corr["p_value"] = nullptr;
      corr["reason"] = std::string(errc_name(e.code()));
    }
    a.put("density/correlation.json", corr.dump(2) + "\n");
    return a;
  }

  Artifacts cluster_stage() {
    Artifacts a;
    auto corpus = load("corpus", cfg_.path("corpus"));
    auto targets = cfg_.list("cluster_targets");
    auto cap = cfg_.positive("cluster_cap");
    auto seed = cfg_.seed();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto& t = targets[i];
      auto key = *parse_vocab_key(t);
      auto refs = cluster::sample_sentences(corpus, key, cap, derive_seed(seed, 100 + i));
      std::string dir = "cluster/" + t + "/";
      a.put(dir + "manifest.tsv", cluster::manifest_to_tsv(refs));
      if (!cfg_.is_set("embeddings_dir")) continue;
      auto set = cluster::deserialize_tkem(read_input("tkem", cfg_.path("embeddings_dir") / (t + ".tkem")));
      cluster::validate_cap(set, cap);
      if (set.target != t) throw Error(Errc::SchemaMismatch, "TKEM target '" + set.target + "' does not match " + t);
      auto km = cluster::kmeans(set.matrix(), kmeans_params(derive_seed(seed, 200 + i)));
      auto prof = cluster::cluster_temporal_profile(km.assignments, set, km.centroids, cfg_.count("cluster_exemplars"));
      a.put(dir + "profiles.tsv", report::profiles_to_tsv(prof));
      a.put(dir + "exemplars.tsv", report::exemplars_to_tsv(prof, set));
      a.put(dir + "assignments.tsv", report::assignments_to_tsv(km, set));
      ojson j;
      j["target"] = t;
      j["records"] = set.records.size();
      j["k"] = static_cast<std::size_t>(km.centroids.rows());
      j["inertia"] = km.inertia;
      j["iterations"] = km.iterations;
      j["best_restart"] = km.best_restart;
      j["inertia_trace"] = km.inertia_trace;
      a.put(dir + "kmeans.json", j.dump(2) + "\n");
    }
    return a;
  }

  Artifacts features_stage() {
    Artifacts a;
    auto corpus = load("features_corpus", features_corpus_path());
    auto names = feature_names();
    features::ResourceSet res;
    for (const auto& [name, p] : cfg_.lexicons()) {
      read_input("lexicon." + name, p);
      res.emplace(name, features::load_lexicon(name, p));
    }
    features::FeatureOptions opt;
    opt.normalize_counts = cfg_.flag("normalize_counts");
    auto paras = segment_paragraphs(corpus, cfg_.positive("paragraph_window"));
    auto raw = features::extract_matrix(paras, res, names, opt, cfg_.threads());
    auto z = features::standardize(raw);
    auto filt = features::filter_features(z, cfg_.real("r_max"));
    a.put("features/matrix_raw.tsv", features::matrix_to_tsv(raw));
    a.put("features/matrix.tsv", features::matrix_to_tsv(z));
    a.put("features/scaling.json", features::scaling_to_json(z));
    a.put("features/filter.tsv", report::filter_to_tsv(z, filt));
    a.put("features/matrix_filtered.tsv", features::matrix_to_tsv(features::select_columns(z, filt.kept)));
    return a;
  }

  Artifacts regress_stage() {
    Artifacts a;
    auto raw = features::matrix_from_tsv(read_input("feature_matrix", feature_matrix_path()));
    auto z = features::standardize(raw);
    auto filt = features::filter_features(z, cfg_.real("r_max"));
    auto m = features::select_columns(z, filt.kept);
    if (m.cols() == 0) throw Error(Errc::ZeroVariance, "no usable feature columns after filtering");
    const auto n = static_cast<Eigen::Index>(m.rows.size());
    regress::Matrix X(n, static_cast<Eigen::Index>(m.cols()));
    regress::Vector y(n);
    std::vector<std::string> groups;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = m.rows[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < m.cols(); ++j) X(i, static_cast<Eigen::Index>(j)) = r.values[j];
      y[i] = r.outcome;
      groups.push_back(r.group_id);
    }
    auto mode = cfg_.str("regress_mode");
    auto tag = cfg_.str("dataset_tag");
    const bool by_group = cfg_.flag("bootstrap_groups");
    ojson rep;
    rep["dataset"] = tag;
    rep["outcome"] = cfg_.str("outcome");
    rep["mode"] = mode;
    rep["n"] = m.rows.size();
    rep["features_in"] = raw.names;
    rep["features_kept"] = m.names;

    std::vector<std::size_t> selected;
    if (mode == "pooled" || mode == "both") {
      auto sc = stability_config();
      if (by_group) sc.groups = groups;
      auto st = regress::stability_select(X, y, m.names, sc);
      for (std::size_t j = 0; j < st.features.size(); ++j)
        if (st.features[j].final_selected) selected.push_back(j);
      ojson pooled;
      pooled["stability"] = report::stability_json(st);
      if (!selected.empty()) {
        regress::RefitConfig rc;
        rc.n_boot = cfg_.count("refit_boot");
        rc.ci_level = cfg_.real("ci_level");
        rc.seed = derive_seed(cfg_.seed(), 7);
        rc.threads = cfg_.threads();
        if (by_group) rc.groups = groups;
        auto rf = regress::refit_full(X, y, m.names, selected, rc);
        rf.folds = st.folds;
        pooled["refit"] = report::refit_json(rf, tag);
      } else {
        pooled["refit"] = nullptr;
      }
      rep["pooled"] = std::move(pooled);
    }
    if (mode == "mixed" || mode == "both") {
      std::vector<std::size_t> cols = selected;
      if (mode == "mixed" || cols.empty())
        for (std::size_t j = 0; j < m.cols(); ++j) cols.push_back(j);
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      std::vector<std::string> names;
      for (auto j : cols) names.push_back(m.names[j]);
      auto mr = regress::fit_random_intercept_logistic(regress::take_cols(X, cols), y, groups);
      rep["mixed"] = report::mixed_json(mr, names, tag, cfg_.real("ci_level"));
    }
    a.put("regress/report.json", rep.dump(2) + "\n");

    std::string tsv = "name\tgroup\todds_ratio\tci_lo\tci_hi\tdataset\n";
    nlohmann::json parsed = nlohmann::json::parse(rep.dump());
    bool has_records = (parsed.contains("pooled") && parsed["pooled"]["refit"].is_object()) || parsed.contains("mixed");
    if (has_records)
      for (const auto& f : report::forest_records(parsed))
        tsv += f.name + "\t" + f.group + "\t" + report::num(f.odds_ratio) + "\t" + report::num(f.ci_lo) + "\t" +
               report::num(f.ci_hi) + "\t" + f.dataset + "\n";
    a.put("regress/odds_ratios.tsv", tsv);
    return a;
  }

  Artifacts annot_stage() {
    Artifacts a;
    auto ratings = annot::parse_ratings(read_input("ratings", cfg_.path("ratings")));
    annot::AssignmentTable key;
    if (cfg_.is_set("assignments")) key = annot::parse_assignments(read_input("assignments", cfg_.path("assignments")));
    auto scores = annot::aggregate_preferences(ratings, key, annot_unit());
    std::vector<annot::DimensionStats> table;
    std::set<std::string> dims;
    for (const auto& s : scores) dims.insert(s.dimension);
    for (auto d : annot::kDimensions)
      if (dims.count(std::string(d))) table.push_back(annot::dimension_stats(scores, d));
    for (const auto& d : dims)
      if (!annot::valid_dimension(d)) table.push_back(annot::dimension_stats(scores, d));
    a.put("annot/scores.tsv", annot::scores_to_tsv(scores));
    a.put("annot/table.tsv", annot::stats_to_tsv(table));
    a.put("annot/distribution.tsv", annot::distribution_to_tsv(annot::preference_distribution(ratings, key)));
    if (cfg_.is_set("pair_features")) {
      auto style = features::matrix_from_tsv(read_input("pair_features", cfg_.path("pair_features")));
      auto sem = cluster::deserialize_sent(read_input("pair_embeddings", cfg_.path("pair_embeddings")));
      a.put("annot/pairs.tsv", annot::pairs_to_tsv(annot::select_pairs(style, sem, cfg_.count("pair_top_n"))));
    }
    return a;
  }

  Artifacts plot_stage(const std::set<Stage>& planned) {
    Artifacts a;
    for (const auto& k : plot_kinds(planned)) {
      if (k == "scatter_ll_nd") {
        auto rows = report::shift_from_tsv(read_input("shift_density", stage_file("density/shift_density.tsv")));
        a.put("plots/scatter_ll_nd.svg", plot::scatter_ll_nd(plot::scatter_points(rows), cfg_.real("nd_alpha")));
      } else if (k == "odds_forest") {
        auto recs = forest_input("regress_report", stage_file("regress/report.json"));
        if (cfg_.is_set("contrast_report")) {
          auto more = forest_input("contrast_report", cfg_.path("contrast_report"));
          recs.insert(recs.end(), more.begin(), more.end());
        }
        a.put("plots/odds_forest.svg", plot::odds_forest(recs));
      } else if (k == "preference_stack") {
        auto rows = report::distribution_from_tsv(read_input("distribution", stage_file("annot/distribution.tsv")));
        a.put("plots/preference_stack.svg", plot::preference_stack(rows));
      }
    }
    return a;
  }

  std::vector<report::ForestRecord> forest_input(const std::string& role, const fs::path& p) {
    auto j = nlohmann::json::parse(read_input(role, p), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::SchemaMismatch, p.string() + " is not valid JSON");
    if (j.contains("pooled") && j["pooled"].is_object() && j["pooled"].contains("refit") &&
        j["pooled"]["refit"].is_null() && !j.contains("mixed"))
      return {};
    return report::forest_records(j);
  }

  // Manifest.

  ojson make_manifest(Stage st, const Artifacts& art) const {
    ojson m;
    m["tool"] = "lexshift";
    m["stage"] = std::string(stage_name(st));
    ojson v;
    v["lexshift"] = LEXSHIFT_VERSION;
    v["sgns_format"] = 1;
    v["tkem_format"] = 1;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["boost"] = BOOST_LIB_VERSION;
    m["versions"] = std::move(v);
    m["config_dir"] = cfg_.origin().generic_string();
    m["seed"] = cfg_.seed();
    auto ins = ojson::array();
    for (const auto& i : inputs_) {
      ojson e;
      e["role"] = i.role;
      e["path"] = i.path;
      e["fnv1a64"] = i.fingerprint;
      e["bytes"] = i.bytes;
      ins.push_back(std::move(e));
    }
    m["inputs"] = std::move(ins);
    m["parameters"] = cfg_.used_parameters();
    auto outs = ojson::array();
    for (const auto& [rel, content] : art.files) {
      ojson e;
      e["path"] = rel;
      e["fnv1a64"] = fingerprint(content);
      e["bytes"] = content.size();
      outs.push_back(std::move(e));
    }
    m["outputs"] = std::move(outs);
    return m;
  }

  Config cfg_;
  std::vector<InputRecord> inputs_;
};

/// Machine-readable error record for stderr.
inline std::string error_json(const Error& e, std::string_view stage = "") {
  ojson j;
  j["error"] = std::string(errc_name(e.code()));
  j["kind"] = e.kind() == ErrorKind::config ? "config" : e.kind() == ErrorKind::data ? "data" : "numeric";
  j["message"] = e.detail();
  j["line"] = e.line() ? ojson(*e.line()) : ojson();
  if (!stage.empty()) j["stage"] = std::string(stage);
  return j.dump();
}

inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 3;
}

}  // namespace lexshift::cli
