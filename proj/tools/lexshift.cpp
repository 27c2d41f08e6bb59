// lexshift: command-line driver for the analysis pipeline.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lexshift/cli/pipeline.hpp"

namespace {

using lexshift::Errc;
using lexshift::Error;
namespace cli = lexshift::cli;

struct Options {
  std::string config;
  std::string manifest;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // config key -> value
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config, "key = value config file");
  sub->add_option("--from-manifest", o.manifest, "rerun with the parameters recorded in a run manifest");
  sub->add_option("--set", o.sets, "override a config key (key=value)");
  for (auto [flag, key] : std::initializer_list<std::pair<const char*, const char*>>{
           {"--seed", "seed"}, {"--out", "out"}, {"--corpus", "corpus"}, {"--threads", "threads"}}) {
    sub->add_option_function<std::string>(flag, [&o, k = std::string(key)](const std::string& v) { o.flags[k] = v; },
                                          std::string("sets ") + key);
  }
}

void add_mapped(CLI::App* sub, Options& o, const char* flag, const char* key) {
  sub->add_option_function<std::string>(flag, [&o, k = std::string(key)](const std::string& v) { o.flags[k] = v; },
                                        std::string("sets ") + key);
}

int fail(const Error& e, std::string_view stage) {
  std::cerr << cli::error_json(e, stage) << std::endl;
  return cli::exit_code(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lexshift: two-period lexical and stylistic shift analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LEXSHIFT_VERSION);
  Options o;

  std::map<CLI::App*, cli::Stage> stages;
  auto add_stage = [&](cli::Stage st, const char* help) {
    auto* sub = app.add_subcommand(std::string(cli::stage_name(st)), help);
    add_common(sub, o);
    stages[sub] = st;
    return sub;
  };
  add_stage(cli::Stage::ingest, "parse the corpus, write vocabulary and paragraph tables");
  auto* shift = add_stage(cli::Stage::shift, "log-likelihood frequency-shift rankings and n-grams");
  add_mapped(shift, o, "--contrast", "contrast_corpus");
  add_mapped(shift, o, "--top-k", "top_k");
  add_mapped(shift, o, "--ngrams", "ngram_n");
  add_stage(cli::Stage::embed_train, "train per-period SGNS embeddings");
  auto* density = add_stage(cli::Stage::density, "neighborhood density change for ranked targets");
  add_mapped(density, o, "--k", "nd_k");
  auto* cluster = add_stage(cli::Stage::cluster, "sentence manifests and k-means over token embeddings");
  add_mapped(cluster, o, "--targets", "cluster_targets");
  add_mapped(cluster, o, "--embeddings", "embeddings_dir");
  auto* features = add_stage(cli::Stage::features, "paragraph feature extraction and correlation filtering");
  add_mapped(features, o, "--features-corpus", "features_corpus");
  auto* regress = add_stage(cli::Stage::regress, "stability selection, refit and mixed model");
  add_mapped(regress, o, "--features", "feature_matrix");
  add_mapped(regress, o, "--outcome", "outcome");
  add_mapped(regress, o, "--mode", "regress_mode");
  add_mapped(regress, o, "--dataset", "dataset_tag");
  auto* annot = add_stage(cli::Stage::annot, "preference aggregation and per-dimension tests");
  add_mapped(annot, o, "--ratings", "ratings");
  add_mapped(annot, o, "--assignments", "assignments");
  add_mapped(annot, o, "--unit", "annot_unit");
  auto* plot = add_stage(cli::Stage::plot, "SVG figures from stage reports");
  add_mapped(plot, o, "--kind", "plots");
  add_stage(cli::Stage::all, "run every applicable stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(Error(Errc::Config, e.what()), "");
  }

  cli::Stage stage = cli::Stage::all;
  for (auto& [sub, st] : stages)
    if (sub->parsed()) stage = st;
  const std::string stage_label(cli::stage_name(stage));

  try {
    cli::Config cfg;
    if (!o.manifest.empty()) {
      auto j = nlohmann::json::parse(lexshift::read_file(o.manifest), nullptr, false);
      if (j.is_discarded()) throw Error(Errc::SchemaMismatch, o.manifest + " is not valid JSON");
      cfg = cli::Config::from_manifest(j);
    }
    if (!o.config.empty()) {
      if (!o.manifest.empty()) throw Error(Errc::Config, "--config and --from-manifest are exclusive");
      cfg = cli::Config::load(o.config);
    }
    for (const auto& s : o.sets) cfg.set_override(s);
    for (const auto& [k, v] : o.flags) cfg.set(k, v, cli::Source::flag);

    cli::Pipeline p(std::move(cfg));
    auto written = p.run(stage);
    std::printf("%s: %zu files written to %s\n", stage_label.c_str(), written.size(), p.out_dir().string().c_str());
    return 0;
  } catch (const Error& e) {
    return fail(e, stage_label);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(Error(Errc::Io, e.what()), stage_label);
  } catch (const std::exception& e) {
    return fail(Error(Errc::MalformedRow, e.what()), stage_label);
  }
}
