#pragma once

// Per-occurrence contextual embeddings of one target: sentence sampling,
// TKEM/SENT interchange files, k-means, and temporal cluster profiles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "lexshift/common/binary.hpp"
#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/random.hpp"
#include "lexshift/common/text.hpp"
#include "lexshift/corpus.hpp"

namespace lexshift::cluster {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SentenceRef {
  std::string doc_id;
  Period period = Period::T1;
  std::size_t sent_index = 0;
  std::size_t token_index = 0;
  std::string sentence_text;

  bool operator==(const SentenceRef&) const = default;
};

inline std::string sentence_text(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(' ');
    out += s[i].form;
  }
  return out;
}

/// One record per occurrence of `target`; per period all occurrences up to
/// `cap`, else a seeded uniform subsample of exactly `cap` kept in corpus order.
inline std::vector<SentenceRef> sample_sentences(const AnnotatedCorpus& corpus, const VocabKey& target,
                                                 std::size_t cap = 1000, std::uint64_t seed = 0) {
  std::vector<SentenceRef> per[2];
  for (const auto& doc : corpus.documents()) {
    for (std::size_t si = 0; si < doc.sentences.size(); ++si) {
      const auto& s = doc.sentences[si];
      std::string text;
      for (std::size_t ti = 0; ti < s.size(); ++ti) {
        auto pos = coarse_pos(s[ti].upos);
        if (!pos || *pos != target.pos || text::lower(s[ti].lemma) != target.lemma) continue;
        if (text.empty()) text = sentence_text(s);
        per[period_index(doc.period)].push_back({doc.doc_id, doc.period, si, ti, text});
      }
    }
  }
  if (per[0].empty() && per[1].empty())
    throw Error(Errc::TargetNotFound, "'" + target.str() + "' does not occur in the corpus");
  std::vector<SentenceRef> out;
  for (std::size_t p = 0; p < 2; ++p) {
    auto& v = per[p];
    if (v.size() <= cap) {
      out.insert(out.end(), v.begin(), v.end());
      continue;
    }
    Rng rng(derive_seed(seed, p));
    for (auto i : sample_indices(v.size(), cap, rng)) out.push_back(v[i]);
  }
  return out;
}

// Sentence manifest TSV.

inline std::string manifest_to_tsv(const std::vector<SentenceRef>& refs) {
  std::string out = "doc_id\tperiod\tsent_index\ttoken_index\tsentence_text\n";
  for (const auto& r : refs) {
    if (r.sentence_text.find_first_of("\t\n") != std::string::npos)
      throw Error(Errc::InvalidArgument, "sentence text contains a tab or newline");
    out += r.doc_id + "\t" + std::string(period_name(r.period)) + "\t" + std::to_string(r.sent_index) + "\t" +
           std::to_string(r.token_index) + "\t" + r.sentence_text + "\n";
  }
  return out;
}

inline std::vector<SentenceRef> manifest_from_tsv(std::string_view content) {
  std::vector<SentenceRef> out;
  auto lines = text::split(content, '\n');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 5) throw Error(Errc::MalformedRow, "manifest row needs 5 fields", i + 1);
    auto per = parse_period(f[1]);
    if (!per) throw Error(Errc::UnknownPeriodLabel, "period '" + std::string(f[1]) + "'", i + 1);
    out.push_back({std::string(f[0]), *per, static_cast<std::size_t>(detail::parse_int(f[2], i + 1, "sent_index")),
                   static_cast<std::size_t>(detail::parse_int(f[3], i + 1, "token_index")), std::string(f[4])});
  }
  return out;
}

inline void write_manifest(const std::vector<SentenceRef>& refs, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  f << manifest_to_tsv(refs);
}

// TKEM token-embedding files.

struct TokenRecord {
  std::vector<float> vector;
  SentenceRef ref;

  bool operator==(const TokenRecord&) const = default;
};

struct TokenEmbeddingSet {
  std::string target;
  std::size_t dim = 0;
  std::vector<TokenRecord> records;

  bool operator==(const TokenEmbeddingSet&) const = default;

  RowMatrix matrix() const {
    RowMatrix X(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < records.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = records[i].vector[d];
    return X;
  }

  std::size_t count(Period p) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [p](const TokenRecord& r) { return r.ref.period == p; }));
  }
};

namespace detail {

using nlohmann::json;

inline json parse_json_line(std::string_view line, Errc on_fail, const std::string& what) {
  auto j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(on_fail, what + " is not a JSON object");
  return j;
}

template <class T>
T field(const json& j, const char* key, Errc on_fail) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(on_fail, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(on_fail, std::string("field '") + key + "' has the wrong type");
  }
}

inline void put_vector(std::string& out, std::span<const float> v, std::size_t dim) {
  if (v.size() != dim)
    throw Error(Errc::DimensionMismatch,
                "vector of length " + std::to_string(v.size()) + " in a dim-" + std::to_string(dim) + " file");
  for (float x : v) binary::put_f32(out, x);
}

inline std::vector<float> get_vector(binary::Reader& r, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) {
    x = r.f32();
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, "non-finite vector component");
  }
  return v;
}

// Header line, then records. A record line that fails to parse right after a
// payload means the payload length disagreed with the header dim.
struct Header {
  std::size_t dim;
  std::size_t count;
  json j;
};

inline Header read_header(binary::Reader& r, std::string_view magic) {
  if (r.done()) throw Error(Errc::BadMagic, "empty file");
  std::string_view line;
  try {
    line = r.line();
  } catch (const Error&) {
    throw Error(Errc::BadMagic, "no header line");
  }
  auto j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("magic") || j["magic"] != magic)
    throw Error(Errc::BadMagic, "expected " + std::string(magic) + " header");
  auto version = field<int>(j, "version", Errc::BadMagic);
  if (version != 1) throw Error(Errc::BadMagic, "unsupported version " + std::to_string(version));
  auto dim = field<long long>(j, "dim", Errc::DimensionMismatch);
  auto count = field<long long>(j, "count", Errc::TruncatedPayload);
  if (dim <= 0) throw Error(Errc::DimensionMismatch, "dim must be >= 1");
  if (count < 0) throw Error(Errc::TruncatedPayload, "negative count");
  return {static_cast<std::size_t>(dim), static_cast<std::size_t>(count), std::move(j)};
}

inline json read_record_meta(binary::Reader& r, std::size_t i, std::size_t count) {
  if (r.done())
    throw Error(Errc::TruncatedPayload,
                "header declares " + std::to_string(count) + " records, found " + std::to_string(i));
  std::string_view line;
  try {
    line = r.line();
  } catch (const Error&) {
    throw Error(i == 0 ? Errc::TruncatedPayload : Errc::DimensionMismatch,
                "record " + std::to_string(i) + " metadata line unreadable");
  }
  return parse_json_line(line, i == 0 ? Errc::MalformedRow : Errc::DimensionMismatch,
                         "record " + std::to_string(i) + " metadata");
}

inline void expect_end(const binary::Reader& r) {
  if (!r.done()) throw Error(Errc::DimensionMismatch, "trailing bytes after the last declared record");
}

}  // namespace detail

inline std::string serialize_tkem(const TokenEmbeddingSet& set) {
  using nlohmann::json;
  std::string out;
  json h = {{"magic", "TKEM"}, {"version", 1}, {"target", set.target}, {"dim", set.dim}, {"count", set.records.size()}};
  out += h.dump() + "\n";
  for (const auto& rec : set.records) {
    json m = {{"period", period_name(rec.ref.period)},
              {"doc_id", rec.ref.doc_id},
              {"sent_index", rec.ref.sent_index},
              {"token_index", rec.ref.token_index},
              {"sentence_text", rec.ref.sentence_text}};
    out += m.dump() + "\n";
    detail::put_vector(out, rec.vector, set.dim);
  }
  return out;
}

inline TokenEmbeddingSet deserialize_tkem(std::string_view data) {
  binary::Reader r(data);
  auto h = detail::read_header(r, "TKEM");
  TokenEmbeddingSet set;
  set.dim = h.dim;
  set.target = h.j.value("target", std::string());
  set.records.reserve(std::min<std::size_t>(h.count, data.size() / (h.dim * 4) + 1));
  for (std::size_t i = 0; i < h.count; ++i) {
    auto m = detail::read_record_meta(r, i, h.count);
    Errc bad = i == 0 ? Errc::MalformedRow : Errc::DimensionMismatch;
    TokenRecord rec;
    auto per = parse_period(detail::field<std::string>(m, "period", bad));
    if (!per) throw Error(Errc::UnknownPeriodLabel, "record " + std::to_string(i) + " has an unknown period");
    rec.ref.period = *per;
    rec.ref.doc_id = detail::field<std::string>(m, "doc_id", bad);
    rec.ref.sent_index = detail::field<std::size_t>(m, "sent_index", bad);
    rec.ref.token_index = detail::field<std::size_t>(m, "token_index", bad);
    rec.ref.sentence_text = detail::field<std::string>(m, "sentence_text", bad);
    rec.vector = detail::get_vector(r, h.dim);
    set.records.push_back(std::move(rec));
  }
  detail::expect_end(r);
  return set;
}

inline void write_tkem(const TokenEmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  auto bytes = serialize_tkem(set);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline TokenEmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return deserialize_tkem(read_file(path));
}

/// Records above `cap` in either period violate the sampling contract.
inline void validate_cap(const TokenEmbeddingSet& set, std::size_t cap = 1000) {
  for (auto p : {Period::T1, Period::T2})
    if (set.count(p) > cap)
      throw Error(Errc::InvalidArgument, std::string(period_name(p)) + " has " + std::to_string(set.count(p)) +
                                             " records, above the cap of " + std::to_string(cap));
}

// SENT sentence-embedding sidecar.

struct SentenceRecord {
  std::string pair_id;
  std::string version;  // "human" or "llm"
  std::vector<float> vector;

  bool operator==(const SentenceRecord&) const = default;
};

struct SentenceEmbeddingSet {
  std::size_t dim = 0;
  std::vector<SentenceRecord> records;

  bool operator==(const SentenceEmbeddingSet&) const = default;
};

inline std::string serialize_sent(const SentenceEmbeddingSet& set) {
  using nlohmann::json;
  std::string out;
  json h = {{"magic", "SENT"}, {"version", 1}, {"dim", set.dim}, {"count", set.records.size()}};
  out += h.dump() + "\n";
  for (const auto& rec : set.records) {
    json m = {{"pair_id", rec.pair_id}, {"version", rec.version}};
    out += m.dump() + "\n";
    detail::put_vector(out, rec.vector, set.dim);
  }
  return out;
}

inline SentenceEmbeddingSet deserialize_sent(std::string_view data) {
  binary::Reader r(data);
  auto h = detail::read_header(r, "SENT");
  SentenceEmbeddingSet set;
  set.dim = h.dim;
  for (std::size_t i = 0; i < h.count; ++i) {
    auto m = detail::read_record_meta(r, i, h.count);
    Errc bad = i == 0 ? Errc::MalformedRow : Errc::DimensionMismatch;
    SentenceRecord rec;
    rec.pair_id = detail::field<std::string>(m, "pair_id", bad);
    rec.version = detail::field<std::string>(m, "version", bad);
    if (rec.version != "human" && rec.version != "llm")
      throw Error(Errc::MalformedRow, "record " + std::to_string(i) + " version must be human or llm");
    rec.vector = detail::get_vector(r, h.dim);
    set.records.push_back(std::move(rec));
  }
  detail::expect_end(r);
  return set;
}

inline void write_sent(const SentenceEmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  auto bytes = serialize_sent(set);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline SentenceEmbeddingSet read_sentence_embeddings(const std::filesystem::path& path) {
  return deserialize_sent(read_file(path));
}

// k-means.

struct KMeansParams {
  std::size_t k = 8;
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  RowMatrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // after every assignment step
  std::size_t best_restart = 0;
};

namespace detail {

inline double sq_dist(const RowMatrix& X, Eigen::Index i, const RowMatrix& C, Eigen::Index c) {
  return (X.row(i) - C.row(c)).squaredNorm();
}

// Nearest centroid per point, lowest index on ties. Returns inertia.
inline double assign(const RowMatrix& X, const RowMatrix& C, std::vector<std::size_t>& a, std::vector<double>& d2) {
  const auto n = X.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < C.rows(); ++c) {
      double d = sq_dist(X, i, C, c);
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    a[static_cast<std::size_t>(i)] = arg;
    d2[static_cast<std::size_t>(i)] = best;
  }
  double s = 0;
  for (double v : d2) s += v;
  return s;
}

inline RowMatrix kmeanspp(const RowMatrix& X, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.rows());
  RowMatrix C(static_cast<Eigen::Index>(k), X.cols());
  auto first = rng.below(n);
  C.row(0) = X.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(X, static_cast<Eigen::Index>(i), C, 0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.below(n);
    } else {
      double u = rng.uniform() * total;
      double acc = 0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    C.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(X, static_cast<Eigen::Index>(i), C, static_cast<Eigen::Index>(c)));
  }
  return C;
}

inline KMeansResult lloyd(const RowMatrix& X, std::size_t k, std::size_t max_iter, double tol, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.rows());
  KMeansResult res;
  res.centroids = kmeanspp(X, k, rng);
  res.assignments.assign(n, 0);
  std::vector<double> d2(n);
  auto& C = res.centroids;
  for (std::size_t it = 0; it < max_iter; ++it) {
    double inertia = assign(X, C, res.assignments, d2);
    if (!res.inertia_trace.empty() && inertia > res.inertia_trace.back() * (1.0 + 1e-12) + 1e-12)
      throw Error(Errc::NonConvergence, "k-means inertia increased between iterations");
    res.inertia_trace.push_back(inertia);
    res.iterations = it + 1;

    RowMatrix next = RowMatrix::Zero(C.rows(), C.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(res.assignments[i])) += X.row(static_cast<Eigen::Index>(i));
      ++sizes[res.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        next.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: reseed at the point farthest from its centroid.
      std::size_t far = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && sizes[res.assignments[i]] > 1 && d2[i] > best) {
          best = d2[i];
          far = i;
        }
      taken[far] = true;
      next.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(far));
    }
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, (next.row(static_cast<Eigen::Index>(c)) - C.row(static_cast<Eigen::Index>(c))).norm());
    C = std::move(next);
    if (shift < tol) break;
  }
  res.inertia = assign(X, C, res.assignments, d2);
  if (res.inertia > res.inertia_trace.back() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::NonConvergence, "k-means inertia increased on the final assignment");
  res.inertia_trace.push_back(res.inertia);
  return res;
}

}  // namespace detail

/// Best of `restarts` k-means++ seeded Lloyd runs by inertia (ties: lowest
/// restart). Results do not depend on the thread count.
inline KMeansResult kmeans(const RowMatrix& X, const KMeansParams& p = {}) {
  if (p.k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (p.restarts == 0) throw Error(Errc::InvalidArgument, "restarts must be >= 1");
  if (static_cast<std::size_t>(X.rows()) < p.k)
    throw Error(Errc::TooFewPoints,
                std::to_string(X.rows()) + " points cannot form " + std::to_string(p.k) + " clusters");
  if (!X.allFinite()) throw Error(Errc::NonFinite, "non-finite input to k-means");
  std::vector<KMeansResult> runs(p.restarts);
  parallel_for(
      p.restarts,
      [&](std::size_t r) {
        Rng rng(derive_seed(p.seed, r));
        runs[r] = detail::lloyd(X, p.k, p.max_iter, p.tol, rng);
      },
      p.threads ? p.threads : default_threads());
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  auto out = std::move(runs[best]);
  out.best_restart = best;
  return out;
}

/// Contingency-table ARI between two labelings.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "labelings differ in length");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (auto& [_, v] : cells) sum_ij += c2(v);
  for (auto& [_, v] : ra) sum_a += c2(v);
  for (auto& [_, v] : rb) sum_b += c2(v);
  double expected = sum_a * sum_b / c2(n);
  double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

// Temporal profiles.

struct ClusterProfile {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  std::size_t count_t1 = 0;
  std::size_t count_t2 = 0;
  double pct_t1 = 0.0;
  double pct_t2 = 0.0;
  std::vector<std::size_t> exemplars;  // record indices, nearest the centroid first
};

inline std::vector<ClusterProfile> cluster_temporal_profile(std::span<const std::size_t> assignments,
                                                            const TokenEmbeddingSet& records,
                                                            const RowMatrix& centroids, std::size_t n_exemplars = 4) {
  if (assignments.size() != records.records.size())
    throw Error(Errc::LengthMismatch, "assignments and records differ in length");
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<ClusterProfile> out(k);
  std::vector<std::vector<std::pair<double, std::size_t>>> members(k);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    auto c = assignments[i];
    if (c >= k) throw Error(Errc::InvalidArgument, "assignment outside the centroid range");
    const auto& v = records.records[i].vector;
    double d = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      double diff = v[j] - centroids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
      d += diff * diff;
    }
    members[c].emplace_back(d, i);
    ++out[c].size;
    if (records.records[i].ref.period == Period::T1)
      ++out[c].count_t1;
    else
      ++out[c].count_t2;
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto& p = out[c];
    p.cluster_id = c;
    if (p.size) {
      p.pct_t1 = 100.0 * static_cast<double>(p.count_t1) / static_cast<double>(p.size);
      p.pct_t2 = 100.0 * static_cast<double>(p.count_t2) / static_cast<double>(p.size);
    }
    auto& m = members[c];
    std::sort(m.begin(), m.end());
    for (std::size_t i = 0; i < std::min(n_exemplars, m.size()); ++i) p.exemplars.push_back(m[i].second);
  }
  return out;
}

}  // namespace lexshift::cluster
