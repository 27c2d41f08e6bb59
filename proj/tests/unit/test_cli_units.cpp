#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "lexshift/cli/pipeline.hpp"
#include "support.hpp"

using namespace lexshift;
using namespace lexshift::cli;
using lexshift::testing::fixture;
using lexshift::testing::TempDir;
namespace pt = boost::property_tree;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

pt::ptree parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);  // throws on malformed XML
  return tree;
}

/// Every element named `tag` anywhere below `node`.
void collect(const pt::ptree& node, const std::string& tag, std::vector<const pt::ptree*>& out) {
  for (const auto& [name, child] : node) {
    if (name == tag) out.push_back(&child);
    collect(child, tag, out);
  }
}

std::vector<const pt::ptree*> elements(const pt::ptree& tree, const std::string& tag) {
  std::vector<const pt::ptree*> out;
  collect(tree, tag, out);
  return out;
}

std::string attr(const pt::ptree* e, const std::string& name) { return e->get<std::string>("<xmlattr>." + name, ""); }

std::vector<const pt::ptree*> with_class(const std::vector<const pt::ptree*>& v, const std::string& cls) {
  std::vector<const pt::ptree*> out;
  for (auto* e : v)
    if (attr(e, "class").find(cls) != std::string::npos) out.push_back(e);
  return out;
}

}  // namespace

TEST(Config, ParseAndTypes) {
  auto c = Config::parse("# comment\n top_k = 7\nll_threshold=10.5\n\ndeterministic = yes\nenet_alpha = 0.5, 1\n");
  EXPECT_EQ(c.positive("top_k"), 7u);
  EXPECT_DOUBLE_EQ(c.real("ll_threshold"), 10.5);
  EXPECT_TRUE(c.flag("deterministic"));
  EXPECT_EQ(c.real_list("enet_alpha"), (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.positive("cluster_k"), 8u);
  EXPECT_DOUBLE_EQ(c.real("r_max"), 0.7);
  EXPECT_DOUBLE_EQ(Config().real("ll_threshold"), 15.13);
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { Config::parse("nonsense_key = 1\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("top_k = 1\ntop_k = 2\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("top_k\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("top_k = ten\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("deterministic = maybe\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("r_max = inf\n"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::parse("top_k = 0\n").positive("top_k"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config().set_override("top_k"); }), Errc::Config);
  EXPECT_EQ(code_of([] { Config::load("/nonexistent/x.conf"); }), Errc::MissingResource);
  try {
    Config::parse("top_k = 1\n\nbad line\n");
  } catch (const Error& e) {
    EXPECT_EQ(e.line(), std::optional<std::size_t>(3));
  }
}

TEST(Config, PathsResolveByOrigin) {
  auto c = Config::load(fixture("fixture.conf"));
  EXPECT_EQ(c.path("corpus"), fixture("corpus.tsv"));
  EXPECT_EQ(c.lexicons().at("aoa"), fixture("aoa.csv"));
  c.set("corpus", "rel/elsewhere.tsv");
  EXPECT_EQ(c.path("corpus"), std::filesystem::path("rel/elsewhere.tsv"));
  c.set("corpus", "/abs/c.tsv", Source::file);
  EXPECT_EQ(c.path("corpus"), std::filesystem::path("/abs/c.tsv"));
}

TEST(Config, UsedParametersCarryBasis) {
  auto c = Config::parse("top_k = 3\n");
  c.set_override("seed=9");
  (void)c.positive("top_k");
  (void)c.seed();
  (void)c.real("ll_threshold");
  auto used = c.used_parameters();
  ASSERT_EQ(used.size(), 3u);
  EXPECT_EQ(used[0]["key"], "ll_threshold");
  EXPECT_EQ(used[0]["source"], "default");
  EXPECT_EQ(used[0]["value"], "15.13");
  EXPECT_NE(used[0]["basis"].get<std::string>().find("published"), std::string::npos);
  EXPECT_EQ(used[1]["key"], "seed");
  EXPECT_EQ(used[1]["source"], "flag");
  EXPECT_EQ(used[2]["source"], "file");
  for (const auto& s : param_specs()) EXPECT_FALSE(s.basis.empty()) << s.key;

  nlohmann::json m;
  m["parameters"] = used;
  m["config_dir"] = "/cfg";
  auto back = Config::from_manifest(m);
  EXPECT_EQ(back.seed(), 9u);
  EXPECT_EQ(back.positive("top_k"), 3u);
  EXPECT_EQ(back.origin(), std::filesystem::path("/cfg"));
  EXPECT_EQ(code_of([] { Config::from_manifest(nlohmann::json::object()); }), Errc::SchemaMismatch);
}

TEST(Config, ThreadsFromEnvironment) {
  ::setenv("LEXSHIFT_THREADS", "3", 1);
  EXPECT_EQ(Config().threads(), 3u);
  ::unsetenv("LEXSHIFT_THREADS");
  EXPECT_EQ(Config::parse("threads = 2\n").threads(), 2u);
}

TEST(Report, ShiftTableRoundTrip) {
  freq::ShiftRecord r = freq::make_shift_record("cat", CoarsePos::NOUN, 3, 9, 1, 9);
  r.nd_t1 = 0.25;
  r.nd_t2 = 0.5;
  r.delta_nd = 0.25;
  r.u_stat = 7000;
  r.p_value = 0.01;
  freq::ShiftRecord ng = freq::make_shift_record("at the end of the", std::nullopt, 1, 9, 4, 9);
  std::vector<report::ShiftRow> rows{{1, r}, {1, ng}};
  auto tsv = report::shift_to_tsv(rows);
  auto back = report::shift_from_tsv(tsv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].record.key, "cat");
  EXPECT_NEAR(back[0].record.ll, 1.0464962875290957, 1e-8);
  EXPECT_EQ(back[0].record.delta_nd, 0.25);
  EXPECT_FALSE(back[1].record.pos);
  EXPECT_FALSE(back[1].record.p_value);
  EXPECT_EQ(report::shift_to_tsv(back), tsv);
  EXPECT_EQ(code_of([] { report::shift_from_tsv("Target\tLL\n"); }), Errc::SchemaMismatch);
}

TEST(Report, Fingerprint) {
  EXPECT_EQ(fingerprint(""), "cbf29ce484222325");
  EXPECT_EQ(fingerprint("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fingerprint("foobar"), "85944171f73967e8");
}

TEST(Report, ErrorJsonAndExitCodes) {
  auto j = nlohmann::json::parse(error_json(Error(Errc::MalformedRow, "bad field", 12), "ingest"));
  EXPECT_EQ(j["error"], "MalformedRow");
  EXPECT_EQ(j["kind"], "data");
  EXPECT_EQ(j["line"], 12);
  EXPECT_EQ(j["stage"], "ingest");
  EXPECT_EQ(exit_code(Error(Errc::Config, "")), 2);
  EXPECT_EQ(exit_code(Error(Errc::MissingResource, "")), 2);
  EXPECT_EQ(exit_code(Error(Errc::BadMagic, "")), 3);
  EXPECT_EQ(exit_code(Error(Errc::NonConvergence, "")), 4);
  EXPECT_EQ(exit_code(Error(Errc::ZeroVariance, "")), 4);
}

TEST(Plot, EmptyScatterHasAxesOnly) {
  auto tree = parse_svg(plot::scatter_ll_nd({}));
  EXPECT_TRUE(elements(tree, "circle").empty());
  auto lines = elements(tree, "line");
  EXPECT_EQ(with_class(lines, "x-axis").size(), 1u);
  EXPECT_EQ(with_class(lines, "y-axis").size(), 1u);
}

TEST(Plot, NonSignificantMarkerIsGray) {
  auto tree = parse_svg(plot::scatter_ll_nd({{"word_NOUN", 20.0, 0.01, 0.05, false}}));
  auto circles = elements(tree, "circle");
  ASSERT_EQ(circles.size(), 1u);
  EXPECT_EQ(attr(circles[0], "fill"), plot::kGray);
  EXPECT_EQ(plot::marker_color({"x", 1, 1, 0.049, true}), plot::kDarkBlue);
  EXPECT_EQ(plot::marker_color({"x", 1, 1, 0.049, false}), plot::kLightBlue);
  EXPECT_EQ(plot::marker_color({"x", 1, 1, 0.5, true}), plot::kGray);
}

TEST(Plot, ScatterCoordinatesFollowAffineMap) {
  struct Expect {
    double ll, nd, cx, cy;
  };
  // x in [-10, 8] and y in [-0.05, 0.06], each padded by 5%, onto [70, 620] x [430, 30].
  const std::vector<Expect> ex{{-10, -0.02, 95.00, 312.64}, {-6, 0.01, 206.11, 213.47}, {-3, -0.05, 289.44, 411.82},
                               {-1, 0.03, 345.00, 147.36},  {0.5, 0.0, 386.67, 246.53}, {2, 0.06, 428.33, 48.18},
                               {3.5, -0.01, 470.00, 279.59}, {5, 0.02, 511.67, 180.41}, {6, -0.03, 539.44, 345.70},
                               {8, 0.04, 595.00, 114.30}};
  const double p[10] = {0.01, 0.2, 0.001, 0.04, 0.5, 0.03, 0.07, 0.002, 0.01, 0.9};
  std::vector<plot::ScatterPoint> pts;
  for (std::size_t i = 0; i < ex.size(); ++i)
    pts.push_back({"w" + std::to_string(i), ex[i].ll, ex[i].nd, p[i], i % 3 == 2});
  auto tree = parse_svg(plot::scatter_ll_nd(pts));
  auto circles = elements(tree, "circle");
  ASSERT_EQ(circles.size(), 10u);
  std::size_t gray = 0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_NEAR(std::stod(attr(circles[i], "cx")), ex[i].cx, 0.006) << i;
    EXPECT_NEAR(std::stod(attr(circles[i], "cy")), ex[i].cy, 0.006) << i;
    gray += attr(circles[i], "fill") == plot::kGray;
  }
  EXPECT_EQ(gray, 4u);
}

TEST(Plot, ScatterRejectsNonFinite) {
  EXPECT_EQ(code_of([] { plot::scatter_ll_nd({{"x", std::nan(""), 0, 1, false}}); }), Errc::SchemaMismatch);
}

TEST(Plot, ForestReferenceLineAtOne) {
  std::vector<report::ForestRecord> recs{{"aoa", "lexical", 0.8, 0.7, 0.9, "original"},
                                         {"aoa", "lexical", 0.6, 0.5, 0.75, "llm"},
                                         {"negations", "syntax", 1.3, 1.1, 1.6, "original"}};
  auto svg = plot::odds_forest(recs);
  auto tree = parse_svg(svg);
  auto L = plot::forest_layout(recs);
  EXPECT_EQ(L.rows, (std::vector<std::string>{"lexical/aoa", "syntax/negations"}));
  auto ref = with_class(elements(tree, "line"), "reference");
  ASSERT_EQ(ref.size(), 1u);
  EXPECT_FALSE(attr(ref[0], "stroke-dasharray").empty());
  EXPECT_NEAR(std::stod(attr(ref[0], "x1")), L.x.map(0.0), 0.006);
  EXPECT_EQ(elements(tree, "circle").size(), 3u);
  EXPECT_EQ(with_class(elements(tree, "line"), "ci").size(), 3u);
  EXPECT_EQ(code_of([] { plot::odds_forest({{"x", "g", 1.0, 1.2, 0.9, "d"}}); }), Errc::SchemaMismatch);
  EXPECT_EQ(code_of([] { plot::odds_forest({{"x", "g", 0.0, 0.0, 0.9, "d"}}); }), Errc::SchemaMismatch);
  parse_svg(plot::odds_forest({}));
}

TEST(Plot, ForestRecordsFromReport) {
  auto j = nlohmann::json::parse(R"({"pooled":{"refit":{"features":[
      {"name":"aoa","group":"lexical","odds_ratio":0.8,"ci_lo":0.7,"ci_hi":0.9,"dataset":"original"}]}}})");
  auto recs = report::forest_records(j);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].group, "lexical");
  EXPECT_EQ(code_of([] { report::forest_records(nlohmann::json::parse(R"({"pooled":{}})")); }), Errc::SchemaMismatch);
  EXPECT_EQ(code_of([] {
              report::forest_records(nlohmann::json::parse(
                  R"({"mixed":{"features":[{"name":"aoa","group":"lexical","odds_ratio":"x","ci_lo":0.7,"ci_hi":0.9,"dataset":"d"}]}})"));
            }),
            Errc::SchemaMismatch);
}

TEST(Plot, PreferenceStackSegments) {
  std::vector<annot::PreferenceCounts> rows{{"clarity", {10, 20, 30, 40}}, {"excitement", {0, 0, 0, 5}}};
  auto tree = parse_svg(plot::preference_stack(rows));
  auto segs = with_class(elements(tree, "rect"), "segment");
  ASSERT_EQ(segs.size(), 8u);
  // The x axis spans 120..620 px for 0..100 %.
  EXPECT_NEAR(std::stod(attr(segs[0], "width")), 50.0, 0.006);
  EXPECT_NEAR(std::stod(attr(segs[3], "x")), 420.0, 0.006);
  EXPECT_NEAR(std::stod(attr(segs[3], "width")), 200.0, 0.006);
  EXPECT_NEAR(std::stod(attr(segs[7], "width")), 500.0, 0.006);
  auto tsv = annot::distribution_to_tsv(rows);
  auto back = report::distribution_from_tsv(tsv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].counts, rows[0].counts);
  EXPECT_EQ(code_of([] { report::distribution_from_tsv("dim\ta\n"); }), Errc::SchemaMismatch);
}

TEST(Plot, EscapesLabels) {
  auto svg = plot::scatter_ll_nd({{"a<b&\"c\"", 1.0, 0.1, 0.01, false}});
  auto tree = parse_svg(svg);
  auto titles = elements(tree, "title");
  ASSERT_FALSE(titles.empty());
  EXPECT_EQ(titles[0]->data(), "a<b&\"c\"");
}

TEST(Pipeline, PlanSkipsUnconfiguredStages) {
  Config c;
  c.set("corpus", fixture("two_doc.tsv").string());
  Pipeline p(c);
  auto plan = p.plan(Stage::all);
  EXPECT_EQ(plan, (std::vector<Stage>{Stage::ingest, Stage::shift, Stage::embed_train, Stage::density, Stage::features,
                                      Stage::regress, Stage::plot}));
  auto full = Pipeline(Config::load(fixture("fixture.conf"))).plan(Stage::all);
  EXPECT_EQ(full.size(), 9u);
  EXPECT_EQ(Pipeline(c).plan(Stage::shift), std::vector<Stage>{Stage::shift});
  for (auto s : kStageOrder) EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_EQ(parse_stage("embed-train"), Stage::embed_train);
  EXPECT_FALSE(parse_stage("train"));
}

TEST(Pipeline, ValidationFailsBeforeWriting) {
  TempDir tmp("cli");
  auto out = tmp.path() / "out";
  auto base = Config::load(fixture("fixture.conf"));
  base.set("out", out.string());

  auto missing = base;
  missing.set("corpus", (tmp.path() / "none.tsv").string());
  EXPECT_EQ(code_of([&] { Pipeline(missing).run(Stage::all); }), Errc::MissingResource);

  auto bad_mode = base;
  bad_mode.set("regress_mode", "fancy");
  EXPECT_EQ(code_of([&] { Pipeline(bad_mode).run(Stage::all); }), Errc::Config);

  auto bad_lex = base;
  bad_lex.set("lexicon.aoa", (tmp.path() / "aoa.csv").string());
  EXPECT_EQ(code_of([&] { Pipeline(bad_lex).run(Stage::features); }), Errc::MissingResource);

  auto bad_target = base;
  bad_target.set("cluster_targets", "model");
  EXPECT_EQ(code_of([&] { Pipeline(bad_target).run(Stage::cluster); }), Errc::Config);

  auto bad_plot = base;
  bad_plot.set("plots", "pie");
  EXPECT_EQ(code_of([&] { Pipeline(bad_plot).run(Stage::all); }), Errc::Config);

  EXPECT_EQ(code_of([&] { Pipeline(base).run(Stage::density); }), Errc::MissingResource);
  EXPECT_FALSE(std::filesystem::exists(out));
}

TEST(Pipeline, LockBlocksConcurrentRun) {
  TempDir tmp("cli");
  auto out = tmp.path() / "out";
  Config c;
  c.set("corpus", fixture("two_doc.tsv").string());
  c.set("out", out.string());
  {
    OutputLock held(out);
    EXPECT_EQ(code_of([&] { Pipeline(c).run(Stage::ingest); }), Errc::Io);
  }
  auto written = Pipeline(c).run(Stage::ingest);
  EXPECT_FALSE(std::filesystem::exists(out / ".lexshift.lock"));
  EXPECT_NE(std::find(written.begin(), written.end(), "manifests/ingest.json"), written.end());
}

TEST(Pipeline, ManifestRecordsInputsAndOutputs) {
  TempDir tmp("cli");
  auto out = tmp.path() / "out";
  Config c;
  c.set("corpus", fixture("two_doc.tsv").string());
  c.set("out", out.string());
  c.set("ngram_min_freq", "1");
  Pipeline(c).run(Stage::shift);
  auto m = nlohmann::json::parse(read_file(out / "manifests" / "shift.json"));
  EXPECT_EQ(m["stage"], "shift");
  EXPECT_EQ(m["seed"], 42);
  ASSERT_EQ(m["inputs"].size(), 1u);
  EXPECT_EQ(m["inputs"][0]["fnv1a64"], fingerprint(read_file(fixture("two_doc.tsv"))));
  std::set<std::string> keys;
  for (const auto& p : m["parameters"]) keys.insert(p["key"].get<std::string>());
  EXPECT_TRUE(keys.count("ll_threshold"));
  EXPECT_TRUE(keys.count("top_k"));
  EXPECT_FALSE(keys.count("sgns_dim"));
  for (const auto& o : m["outputs"])
    EXPECT_EQ(o["fnv1a64"], fingerprint(read_file(out / o["path"].get<std::string>())));
}
