#pragma once

// Paragraph-level stylometric features, z-scoring, and the correlation
// pre-filter.

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/corpus.hpp"

namespace lexshift::features {

// Lexicons.

/// Numeric (`word,value`) or tag (`word,tag` repeated) lexicon, keyed by
/// lowercase word.
struct LexiconResource {
  std::string name;
  std::unordered_map<std::string, double> values;
  std::unordered_map<std::string, std::set<std::string>> tags;
  double fallback = 0.0;  // mean of all values, used when a paragraph has no coverage

  bool is_tagged() const noexcept { return !tags.empty(); }
  std::size_t size() const noexcept { return is_tagged() ? tags.size() : values.size(); }

  std::optional<double> value(const std::string& w) const {
    auto it = values.find(w);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
  bool has_tag(const std::string& w, std::string_view tag) const {
    auto it = tags.find(w);
    return it != tags.end() && it->second.count(std::string(tag));
  }
  bool contains(const std::string& w) const { return is_tagged() ? tags.count(w) > 0 : values.count(w) > 0; }
};

namespace detail {

inline std::vector<std::string> csv_fields(std::string_view line) {
  using Sep = boost::escaped_list_separator<char>;
  std::string s(line);
  boost::tokenizer<Sep> tok(s, Sep('\\', ',', '"'));
  return {tok.begin(), tok.end()};
}

inline std::optional<double> parse_double(std::string_view s) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses a lexicon CSV with a mandatory header whose first column is `word`.
/// A second column named `tag` makes a tag lexicon; any other second column
/// is numeric. A single-column file is a word list with value 1.
inline LexiconResource parse_lexicon(std::string name, std::string_view content) {
  LexiconResource lex;
  lex.name = std::move(name);
  auto lines = text::split(content, '\n');
  std::size_t first = 0;
  while (first < lines.size() && text::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw Error(Errc::MalformedRow, "lexicon '" + lex.name + "' is empty");
  auto header = detail::csv_fields(text::trim(lines[first]));
  if (header.empty() || text::lower(text::trim(header[0])) != "word")
    throw Error(Errc::MalformedRow, "lexicon '" + lex.name + "' header must start with 'word'", first + 1);
  const bool tagged = header.size() >= 2 && text::lower(text::trim(header[1])) == "tag";
  double sum = 0;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto f = detail::csv_fields(line);
    if (f.empty() || text::trim(f[0]).empty())
      throw Error(Errc::MalformedRow, "lexicon '" + lex.name + "' row without a word", i + 1);
    auto word = text::lower(text::trim(f[0]));
    if (tagged) {
      if (f.size() < 2) throw Error(Errc::MalformedRow, "tag lexicon row needs a tag", i + 1);
      lex.tags[word].insert(text::lower(text::trim(f[1])));
      continue;
    }
    double v = 1.0;
    if (header.size() >= 2) {
      if (f.size() < 2) throw Error(Errc::MalformedRow, "lexicon row needs a value", i + 1);
      auto parsed = detail::parse_double(f[1]);
      if (!parsed) throw Error(Errc::MalformedRow, "non-numeric lexicon value '" + f[1] + "'", i + 1);
      if (!std::isfinite(*parsed)) throw Error(Errc::NonFinite, "non-finite lexicon value", i + 1);
      v = *parsed;
    }
    if (lex.values.emplace(word, v).second) sum += v;
  }
  if (lex.size() == 0) throw Error(Errc::MalformedRow, "lexicon '" + lex.name + "' has no entries");
  if (!tagged) lex.fallback = sum / static_cast<double>(lex.values.size());
  return lex;
}

inline LexiconResource load_lexicon(std::string name, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(Errc::MissingResource, "lexicon '" + name + "' not found at " + path.string());
  return parse_lexicon(std::move(name), read_file(path));
}

using ResourceSet = std::map<std::string, LexiconResource>;

inline const std::vector<std::string>& default_negations() {
  static const std::vector<std::string> v{"not", "n't", "never", "no", "nor", "neither", "none",
                                          "nobody", "nothing", "nowhere", "cannot", "without"};
  return v;
}

// Feature registry.

enum class Kind { ratio, count };

struct FeatureDef {
  std::string name;
  Kind kind;
  std::string resource;  // empty when no lexicon is required
  std::string family;
};

inline const std::vector<FeatureDef>& registry() {
  static const std::vector<FeatureDef> defs{
      {"avg_word_length", Kind::ratio, "", "surface"},
      {"avg_aoa", Kind::ratio, "aoa", "psycholinguistic"},
      {"avg_prevalence", Kind::ratio, "prevalence", "psycholinguistic"},
      {"unigram_entropy", Kind::ratio, "", "lexical_semantic"},
      {"stopword_ratio", Kind::ratio, "stopwords", "surface"},
      {"simpsons_d", Kind::ratio, "", "lexical_semantic"},
      {"verb_variability", Kind::ratio, "", "morphosyntactic"},
      {"negations", Kind::count, "", "morphosyntactic"},
      {"adverbial_clauses", Kind::count, "", "syntactic"},
      {"coordinating_conjunctions", Kind::count, "", "morphosyntactic"},
      {"compounds", Kind::count, "", "syntactic"},
      {"brackets", Kind::count, "", "surface"},
      {"commas", Kind::count, "", "surface"},
      {"dashes", Kind::count, "", "surface"},
      {"proper_nouns", Kind::count, "", "morphosyntactic"},
      {"org_entities", Kind::count, "", "lexical_semantic"},
      {"date_entities", Kind::count, "", "lexical_semantic"},
      {"anger_words", Kind::count, "emotion", "sentiment"},
      {"trust_words", Kind::count, "emotion", "sentiment"},
      {"sensorimotor", Kind::ratio, "sensorimotor", "psycholinguistic"},
      {"sentence_length", Kind::ratio, "", "surface"},
      {"dependency_depth", Kind::ratio, "", "syntactic"},
  };
  return defs;
}

/// Family of a registered feature, or "other" for unknown names.
inline std::string feature_family(std::string_view name) {
  for (const auto& d : registry())
    if (d.name == name) return d.family;
  return "other";
}

inline std::vector<std::string> default_feature_names() {
  std::vector<std::string> out;
  for (const auto& d : registry()) out.push_back(d.name);
  return out;
}

inline const FeatureDef& feature_def(std::string_view name) {
  for (const auto& d : registry())
    if (d.name == name) return d;
  throw Error(Errc::Config, "unknown feature '" + std::string(name) + "'");
}

/// Lexicons required by a feature set, sorted and unique.
inline std::vector<std::string> required_resources(const std::vector<std::string>& names) {
  std::set<std::string> r;
  for (const auto& n : names)
    if (auto& d = feature_def(n); !d.resource.empty()) r.insert(d.resource);
  return {r.begin(), r.end()};
}

struct FeatureOptions {
  bool normalize_counts = true;  // per 1000 tokens
};

struct FeatureVector {
  std::string paragraph_id;
  std::string group_id;
  int outcome = 0;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

namespace detail {

inline bool is_dash_token(std::string_view form) {
  if (form.empty()) return false;
  for (char32_t cp : text::decode_utf8(form))
    if (cp != U'-' && (cp < 0x2010 || cp > 0x2015)) return false;
  return true;
}

inline bool is_bracket(std::string_view f) {
  return f == "(" || f == ")" || f == "[" || f == "]" || f == "{" || f == "}" || f == "-LRB-" || f == "-RRB-";
}

inline std::string_view entity_type(std::string_view tag, bool& begins) {
  begins = false;
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I' || tag[0] == 'E' || tag[0] == 'S') && tag[1] == '-') {
    begins = tag[0] == 'B' || tag[0] == 'S';
    return tag.substr(2);
  }
  if (tag == "O" || tag.empty() || tag == "_") return {};
  return tag;
}

// Entity mentions of one type in a sentence: B-/S- starts, or the first of a
// run of bare or I- tags.
inline std::size_t count_entities(const Sentence& s, std::string_view type) {
  std::size_t n = 0;
  std::string_view prev;
  for (const auto& t : s) {
    bool begins;
    auto ty = entity_type(t.ner, begins);
    if (ty == type && (begins || prev != type)) ++n;
    prev = ty;
  }
  return n;
}

// Depth in arcs of the deepest token below the root.
inline std::size_t tree_depth(const Sentence& s) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t d = 0;
    int cur = static_cast<int>(i);
    while (s[static_cast<std::size_t>(cur)].head >= 0 && d <= s.size()) {
      cur = s[static_cast<std::size_t>(cur)].head;
      ++d;
    }
    best = std::max(best, d);
  }
  return best;
}

struct TokenView {
  const Token* tok;
  std::string form_lc;
  std::string lemma_lc;
};

// Lexicon lookup: lowercased form, then lowercased lemma.
inline const std::string* lookup_key(const LexiconResource& lex, const TokenView& t) {
  if (lex.contains(t.form_lc)) return &t.form_lc;
  if (lex.contains(t.lemma_lc)) return &t.lemma_lc;
  return nullptr;
}

inline const LexiconResource& need(const ResourceSet& r, const std::string& name) {
  auto it = r.find(name);
  if (it == r.end()) throw Error(Errc::MissingResource, "lexicon '" + name + "' is not loaded");
  return it->second;
}

}  // namespace detail

/// Computes `names` (registry order by default) for one paragraph. Ratio
/// features with no lexicon coverage take the lexicon mean.
inline FeatureVector extract_features(const Paragraph& para, const ResourceSet& resources,
                                      const std::vector<std::string>& names = default_feature_names(),
                                      const FeatureOptions& opt = {}) {
  const std::size_t N = para.token_count();
  if (N == 0) throw Error(Errc::EmptyParagraph, "paragraph " + para.id() + " has no tokens");
  for (const auto& r : required_resources(names)) detail::need(resources, r);

  std::vector<detail::TokenView> toks;
  toks.reserve(N);
  for (const auto& s : para.sentences)
    for (const auto& t : s) toks.push_back({&t, text::lower(t.form), text::lower(t.lemma)});

  std::unordered_set<std::string> negations;
  if (auto it = resources.find("negation"); it != resources.end()) {
    for (const auto& [w, _] : it->second.values) negations.insert(w);
    for (const auto& [w, _] : it->second.tags) negations.insert(w);
  } else {
    negations.insert(default_negations().begin(), default_negations().end());
  }

  const double per_k = opt.normalize_counts ? 1000.0 / static_cast<double>(N) : 1.0;
  auto lex_mean = [&](const std::string& name) {
    const auto& lex = detail::need(resources, name);
    double sum = 0;
    std::size_t n = 0;
    for (const auto& t : toks)
      if (auto k = detail::lookup_key(lex, t)) {
        sum += lex.values.at(*k);
        ++n;
      }
    return n ? sum / static_cast<double>(n) : lex.fallback;
  };
  auto tag_count = [&](std::string_view tag) {
    const auto& lex = detail::need(resources, "emotion");
    std::size_t n = 0;
    for (const auto& t : toks)
      if (auto k = detail::lookup_key(lex, t); k && lex.has_tag(*k, tag)) ++n;
    return static_cast<double>(n);
  };
  auto count_if_tok = [&](auto pred) {
    std::size_t n = 0;
    for (const auto& t : toks)
      if (pred(t)) ++n;
    return static_cast<double>(n);
  };

  FeatureVector fv;
  fv.paragraph_id = para.id();
  fv.group_id = para.doc_id;
  fv.outcome = static_cast<int>(period_index(para.period));
  fv.values.reserve(names.size());
  for (const auto& name : names) {
    const auto& def = feature_def(name);
    double v = 0;
    if (name == "avg_word_length") {
      double chars = 0, n = 0;
      for (const auto& t : toks)
        if (text::is_alphabetic(t.tok->form)) {
          chars += static_cast<double>(text::codepoint_count(t.tok->form));
          ++n;
        }
      v = n > 0 ? chars / n : 0.0;
    } else if (name == "avg_aoa") {
      v = lex_mean("aoa");
    } else if (name == "avg_prevalence") {
      v = lex_mean("prevalence");
    } else if (name == "sensorimotor") {
      v = lex_mean("sensorimotor");
    } else if (name == "unigram_entropy" || name == "simpsons_d") {
      // Over non-punctuation tokens: forms for entropy, lemmas for Simpson's D.
      std::unordered_map<std::string, std::size_t> freq;
      std::size_t total = 0;
      for (const auto& t : toks) {
        if (t.tok->upos == "PUNCT") continue;
        ++freq[name == "simpsons_d" ? t.lemma_lc : t.form_lc];
        ++total;
      }
      if (name == "unigram_entropy") {
        std::vector<double> terms;
        for (const auto& [_, c] : freq) {
          double p = static_cast<double>(c) / static_cast<double>(total);
          terms.push_back(-p * std::log(p));
        }
        std::sort(terms.begin(), terms.end());
        v = std::accumulate(terms.begin(), terms.end(), 0.0);
      } else if (total >= 2) {
        double s = 0;
        for (const auto& [_, c] : freq) s += static_cast<double>(c) * static_cast<double>(c - 1);
        v = s / (static_cast<double>(total) * static_cast<double>(total - 1));
      }
    } else if (name == "stopword_ratio") {
      const auto& lex = detail::need(resources, "stopwords");
      v = count_if_tok([&](const detail::TokenView& t) { return lex.contains(t.form_lc); }) / static_cast<double>(N);
    } else if (name == "verb_variability") {
      std::unordered_set<std::string> lemmas;
      std::size_t verbs = 0;
      for (const auto& t : toks)
        if (t.tok->upos == "VERB") {
          lemmas.insert(t.lemma_lc);
          ++verbs;
        }
      v = verbs ? static_cast<double>(lemmas.size()) / static_cast<double>(verbs) : 0.0;
    } else if (name == "negations") {
      v = count_if_tok([&](const detail::TokenView& t) {
        return t.tok->deprel == "neg" || negations.count(t.lemma_lc) || negations.count(t.form_lc);
      });
    } else if (name == "adverbial_clauses") {
      v = count_if_tok([](const detail::TokenView& t) { return t.tok->deprel == "advcl"; });
    } else if (name == "coordinating_conjunctions") {
      v = count_if_tok([](const detail::TokenView& t) { return t.tok->upos == "CCONJ"; });
    } else if (name == "compounds") {
      v = count_if_tok([](const detail::TokenView& t) {
        return t.tok->deprel == "compound" || t.tok->deprel.rfind("compound:", 0) == 0;
      });
    } else if (name == "brackets") {
      v = count_if_tok([](const detail::TokenView& t) { return detail::is_bracket(t.tok->form); });
    } else if (name == "commas") {
      v = count_if_tok([](const detail::TokenView& t) { return t.tok->form == ","; });
    } else if (name == "dashes") {
      v = count_if_tok([](const detail::TokenView& t) { return detail::is_dash_token(t.tok->form); });
    } else if (name == "proper_nouns") {
      v = count_if_tok([](const detail::TokenView& t) { return t.tok->upos == "PROPN"; });
    } else if (name == "org_entities" || name == "date_entities") {
      std::string_view type = name == "org_entities" ? "ORG" : "DATE";
      std::size_t n = 0;
      for (const auto& s : para.sentences) n += detail::count_entities(s, type);
      v = static_cast<double>(n);
    } else if (name == "anger_words") {
      v = tag_count("anger");
    } else if (name == "trust_words") {
      v = tag_count("trust");
    } else if (name == "sentence_length") {
      v = static_cast<double>(N) / static_cast<double>(para.sentences.size());
    } else if (name == "dependency_depth") {
      double s = 0;
      for (const auto& sent : para.sentences) s += static_cast<double>(detail::tree_depth(sent));
      v = s / static_cast<double>(para.sentences.size());
    }
    if (def.kind == Kind::count) v *= per_k;
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "feature " + name + " is not finite in " + fv.paragraph_id);
    fv.values.push_back(v);
  }
  return fv;
}

// Matrix, scaling, persistence.

struct Scaling {
  double mean = 0.0;
  double sd = 1.0;
  bool zero_variance = false;

  bool operator==(const Scaling&) const = default;
};

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<FeatureVector> rows;
  std::vector<Scaling> scaling;  // empty until standardized

  bool operator==(const FeatureMatrix&) const = default;

  std::size_t cols() const noexcept { return names.size(); }
  std::vector<double> column(std::size_t j) const {
    std::vector<double> c;
    c.reserve(rows.size());
    for (const auto& r : rows) c.push_back(r.values[j]);
    return c;
  }
  std::vector<double> outcomes() const {
    std::vector<double> y;
    for (const auto& r : rows) y.push_back(r.outcome);
    return y;
  }
};

inline FeatureMatrix extract_matrix(const std::vector<Paragraph>& paragraphs, const ResourceSet& resources,
                                    const std::vector<std::string>& names = default_feature_names(),
                                    const FeatureOptions& opt = {}, unsigned threads = default_threads()) {
  for (const auto& r : required_resources(names)) detail::need(resources, r);
  FeatureMatrix m;
  m.names = names;
  m.rows.resize(paragraphs.size());
  parallel_for(
      paragraphs.size(), [&](std::size_t i) { m.rows[i] = extract_features(paragraphs[i], resources, names, opt); },
      threads);
  return m;
}

/// Z-scores every row with mean and sample sd of the `fit_rows` subset.
/// Zero-variance columns are flagged and left untouched.
inline FeatureMatrix standardize(const FeatureMatrix& m, const std::vector<std::size_t>& fit_rows) {
  if (fit_rows.size() < 2) throw Error(Errc::TooFewRows, "standardization needs at least 2 fit rows");
  FeatureMatrix out = m;
  out.scaling.assign(m.cols(), {});
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mean = 0;
    for (auto i : fit_rows) mean += m.rows.at(i).values[j];
    mean /= static_cast<double>(fit_rows.size());
    double ss = 0;
    for (auto i : fit_rows) ss += (m.rows[i].values[j] - mean) * (m.rows[i].values[j] - mean);
    double sd = std::sqrt(ss / static_cast<double>(fit_rows.size() - 1));
    auto& sc = out.scaling[j];
    sc.mean = mean;
    sc.sd = sd;
    sc.zero_variance = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  }
  for (auto& r : out.rows)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (!out.scaling[j].zero_variance) r.values[j] = (r.values[j] - out.scaling[j].mean) / out.scaling[j].sd;
  return out;
}

inline FeatureMatrix standardize(const FeatureMatrix& m) {
  std::vector<std::size_t> all(m.rows.size());
  std::iota(all.begin(), all.end(), 0);
  return standardize(m, all);
}

/// Applies a fitted scaling to raw rows (e.g. held-out data).
inline FeatureMatrix apply_scaling(const FeatureMatrix& raw, const std::vector<Scaling>& scaling) {
  if (scaling.size() != raw.cols()) throw Error(Errc::DimensionMismatch, "scaling does not match feature count");
  FeatureMatrix out = raw;
  out.scaling = scaling;
  for (auto& r : out.rows)
    for (std::size_t j = 0; j < raw.cols(); ++j)
      if (!scaling[j].zero_variance) r.values[j] = (r.values[j] - scaling[j].mean) / scaling[j].sd;
  return out;
}

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string matrix_to_tsv(const FeatureMatrix& m) {
  std::string out = "paragraph_id\tgroup_id\toutcome";
  for (const auto& n : m.names) out += "\t" + n;
  out += "\n";
  for (const auto& r : m.rows) {
    out += r.paragraph_id + "\t" + r.group_id + "\t" + std::to_string(r.outcome);
    for (double v : r.values) out += "\t" + detail::fmt(v);
    out += "\n";
  }
  return out;
}

inline FeatureMatrix matrix_from_tsv(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (lines.empty() || text::trim(lines[0]).empty()) throw Error(Errc::SchemaMismatch, "feature TSV has no header");
  auto header = text::split(text::trim(lines[0]), '\t');
  if (header.size() < 3 || header[0] != "paragraph_id" || header[1] != "group_id" || header[2] != "outcome")
    throw Error(Errc::SchemaMismatch, "feature TSV header must begin paragraph_id, group_id, outcome", 1);
  FeatureMatrix m;
  for (std::size_t j = 3; j < header.size(); ++j) m.names.emplace_back(header[j]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != header.size())
      throw Error(Errc::MalformedRow, "expected " + std::to_string(header.size()) + " fields", i + 1);
    FeatureVector r;
    r.paragraph_id = std::string(f[0]);
    r.group_id = std::string(f[1]);
    r.outcome = lexshift::detail::parse_int(f[2], i + 1, "outcome");
    if (r.outcome != 0 && r.outcome != 1) throw Error(Errc::MalformedRow, "outcome must be 0 or 1", i + 1);
    for (std::size_t j = 3; j < f.size(); ++j) {
      auto v = detail::parse_double(f[j]);
      if (!v) throw Error(Errc::MalformedRow, "non-numeric value '" + std::string(f[j]) + "'", i + 1);
      if (!std::isfinite(*v)) throw Error(Errc::NonFinite, "non-finite feature value", i + 1);
      r.values.push_back(*v);
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

inline std::string scaling_to_json(const FeatureMatrix& m) {
  nlohmann::ordered_json j;
  j["features"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.scaling.size(); ++i)
    j["features"].push_back({{"name", m.names[i]},
                             {"mean", m.scaling[i].mean},
                             {"sd", m.scaling[i].sd},
                             {"zero_variance", m.scaling[i].zero_variance}});
  return j.dump(2) + "\n";
}

inline std::vector<Scaling> scaling_from_json(std::string_view content, const std::vector<std::string>& names) {
  auto j = nlohmann::json::parse(content.begin(), content.end(), nullptr, false);
  if (j.is_discarded() || !j.contains("features") || !j["features"].is_array())
    throw Error(Errc::SchemaMismatch, "scaling JSON lacks a features array");
  std::vector<Scaling> out;
  const auto& arr = j["features"];
  if (arr.size() != names.size()) throw Error(Errc::SchemaMismatch, "scaling JSON does not match feature count");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (arr[i].value("name", std::string()) != names[i])
      throw Error(Errc::SchemaMismatch, "scaling JSON feature " + std::to_string(i) + " is not " + names[i]);
    out.push_back({arr[i].value("mean", 0.0), arr[i].value("sd", 1.0), arr[i].value("zero_variance", false)});
  }
  return out;
}

// Correlation pre-filter.

struct FilterResult {
  std::vector<std::size_t> kept;                 // column indices, ascending
  std::vector<std::vector<std::size_t>> groups;  // components of the |r| >= r_max graph, by smallest member
  std::vector<std::size_t> representative;       // per group
  std::vector<std::size_t> dropped_zero_variance;
};

namespace detail {
inline double safe_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}
}  // namespace detail

/// Drops zero-variance columns, links columns with |r| >= r_max, and keeps
/// the column of each connected component with the largest |r| to the
/// outcome (ties: smallest name).
inline FilterResult filter_features(const FeatureMatrix& m, double r_max = 0.7) {
  FilterResult res;
  const std::size_t p = m.cols();
  std::vector<std::vector<double>> cols(p);
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < p; ++j) {
    cols[j] = m.column(j);
    bool flagged = !m.scaling.empty() && m.scaling[j].zero_variance;
    auto [lo, hi] = std::minmax_element(cols[j].begin(), cols[j].end());
    if (flagged || cols[j].empty() || *lo == *hi)
      res.dropped_zero_variance.push_back(j);
    else
      live.push_back(j);
  }
  std::vector<std::size_t> parent(p);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = a + 1; b < live.size(); ++b)
      if (std::abs(detail::safe_pearson(cols[live[a]], cols[live[b]])) >= r_max) {
        auto ra = find(live[a]), rb = find(live[b]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
  auto y = m.outcomes();
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (auto j : live) comps[find(j)].push_back(j);
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> ordered(comps.begin(), comps.end());
  for (auto& [_, members] : ordered) {
    std::size_t best = members[0];
    double best_r = -1;
    for (auto j : members) {
      double r = std::abs(detail::safe_pearson(cols[j], y));
      if (r > best_r || (r == best_r && m.names[j] < m.names[best])) {
        best_r = r;
        best = j;
      }
    }
    res.groups.push_back(members);
    res.representative.push_back(best);
    res.kept.push_back(best);
  }
  std::sort(res.kept.begin(), res.kept.end());
  return res;
}

/// Restricts a matrix to the given columns, scaling included.
inline FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::size_t>& cols) {
  FeatureMatrix out;
  for (auto j : cols) out.names.push_back(m.names.at(j));
  if (!m.scaling.empty())
    for (auto j : cols) out.scaling.push_back(m.scaling[j]);
  for (const auto& r : m.rows) {
    FeatureVector v = r;
    v.values.clear();
    for (auto j : cols) v.values.push_back(r.values[j]);
    out.rows.push_back(std::move(v));
  }
  return out;
}

}  // namespace lexshift::features
