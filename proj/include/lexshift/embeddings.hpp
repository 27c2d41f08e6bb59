#pragma once

// Per-period skip-gram embeddings with negative sampling, and neighborhood
// density change between periods.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexshift/common/binary.hpp"
#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/random.hpp"
#include "lexshift/corpus.hpp"
#include "lexshift/stats.hpp"

namespace lexshift::embed {

/// Interned token stream: sentences as runs of type ids.
class TokenStream {
 public:
  void add_sentence(std::span<const std::string> tokens) {
    for (const auto& t : tokens) ids_.push_back(intern(t));
    offsets_.push_back(ids_.size());
  }

  template <class Range>
  void add_sentence_range(const Range& tokens) {
    for (const auto& t : tokens) ids_.push_back(intern(std::string(t)));
    offsets_.push_back(ids_.size());
  }

  std::size_t sentences() const noexcept { return offsets_.size() - 1; }
  std::size_t tokens() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& types() const noexcept { return types_; }

  std::span<const std::uint32_t> sentence(std::size_t i) const {
    return {ids_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  std::uint32_t intern(const std::string& t) {
    auto [it, inserted] = index_.try_emplace(t, static_cast<std::uint32_t>(types_.size()));
    if (inserted) types_.push_back(t);
    return it->second;
  }

  std::vector<std::string> types_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::uint32_t> ids_;
  std::vector<std::size_t> offsets_{0};
};

/// All sentences of one period, tokens rendered by `embedding_token`.
inline TokenStream token_stream(const AnnotatedCorpus& corpus, Period period) {
  TokenStream ts;
  std::vector<std::string> buf;
  for (const auto& doc : corpus.documents()) {
    if (doc.period != period) continue;
    for (const auto& s : doc.sentences) {
      buf.clear();
      for (const auto& t : s) buf.push_back(embedding_token(t));
      ts.add_sentence(buf);
    }
  }
  return ts;
}

struct SgnsParams {
  std::uint32_t dim = 100;
  std::uint32_t window = 5;
  std::uint32_t negative = 5;
  std::uint32_t min_count = 10;
  std::uint32_t epochs = 5;
  double initial_lr = 0.025;
  double subsample = 1e-3;
  unsigned threads = 0;  // 0: default_threads(); ignored in deterministic mode

  bool operator==(const SgnsParams& o) const {
    return dim == o.dim && window == o.window && negative == o.negative && min_count == o.min_count &&
           epochs == o.epochs && initial_lr == o.initial_lr && subsample == o.subsample;
  }
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::vector<std::string> words, std::vector<std::uint64_t> counts, std::vector<float> vectors,
                 std::uint32_t dim, SgnsParams params = {}, std::uint64_t seed = 0, Period period = Period::T1)
      : words_(std::move(words)),
        counts_(std::move(counts)),
        vectors_(std::move(vectors)),
        dim_(dim),
        params_(params),
        seed_(seed),
        period_(period) {
    if (dim_ == 0) throw Error(Errc::InvalidArgument, "dim must be >= 1");
    if (vectors_.size() != words_.size() * dim_)
      throw Error(Errc::InvalidArgument, "vector matrix shape does not match vocabulary");
    if (counts_.empty()) counts_.assign(words_.size(), 0);
    if (counts_.size() != words_.size()) throw Error(Errc::InvalidArgument, "count list does not match vocabulary");
    params_.dim = dim_;
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (!index_.try_emplace(words_[i], i).second)
        throw Error(Errc::InvalidArgument, "duplicate vocabulary word '" + words_[i] + "'");
    norms_.resize(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      double s = 0;
      for (float v : row(i)) s += static_cast<double>(v) * v;
      norms_[i] = std::sqrt(s);
    }
  }

  std::size_t size() const noexcept { return words_.size(); }
  std::uint32_t dim() const noexcept { return dim_; }
  const SgnsParams& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Period period() const noexcept { return period_; }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  const std::vector<float>& vectors() const noexcept { return vectors_; }

  std::span<const float> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const { return norms_[i]; }

  std::optional<std::size_t> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view word) const { return find(word).has_value(); }

  /// Cosine similarity; 0 when either row has zero norm.
  double cosine(std::size_t a, std::size_t b) const {
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 0.0;
    double dot = 0;
    auto ra = row(a), rb = row(b);
    for (std::size_t d = 0; d < dim_; ++d) dot += static_cast<double>(ra[d]) * rb[d];
    return dot / (norms_[a] * norms_[b]);
  }

  bool operator==(const EmbeddingModel& o) const {
    return words_ == o.words_ && counts_ == o.counts_ && vectors_ == o.vectors_ && dim_ == o.dim_ &&
           params_ == o.params_ && seed_ == o.seed_ && period_ == o.period_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::vector<float> vectors_;
  std::uint32_t dim_ = 0;
  SgnsParams params_;
  std::uint64_t seed_ = 0;
  Period period_ = Period::T1;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> norms_;
};

namespace detail {

template <bool Shared>
inline float load(float* p) {
  if constexpr (Shared)
    return std::atomic_ref<float>(*p).load(std::memory_order_relaxed);
  else
    return *p;
}

template <bool Shared>
inline void store(float* p, float v) {
  if constexpr (Shared)
    std::atomic_ref<float>(*p).store(v, std::memory_order_relaxed);
  else
    *p = v;
}

struct TrainState {
  const TokenStream* stream;
  std::vector<std::int64_t> remap;  // stream type id -> vocab row, -1 if dropped
  std::vector<double> keep_prob;    // per vocab row
  std::vector<double> alias_prob;   // Walker alias table over unigram^0.75
  std::vector<std::uint32_t> alias;
  std::uint64_t train_words = 0;
  SgnsParams p;
  float* syn0 = nullptr;
  float* syn1 = nullptr;
};

inline void build_alias(const std::vector<double>& weights, std::vector<double>& prob,
                        std::vector<std::uint32_t>& alias) {
  const std::size_t n = weights.size();
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  prob.assign(n, 0.0);
  alias.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    auto s = small.back(), l = large.back();
    small.pop_back();
    prob[s] = scaled[s];
    alias[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) prob[i] = 1.0;
  for (auto i : small) prob[i] = 1.0;
}

/// Unbiased draw in [0, n) by multiply-shift with rejection. One 64-bit
/// engine output supplies both the index and the alias coin.
inline std::uint32_t draw_negative(const TrainState& st, Rng& rng) {
  const auto n = static_cast<std::uint32_t>(st.alias.size());
  std::uint64_t x = rng.next();
  std::uint64_t m = (x >> 32) * n;
  if (static_cast<std::uint32_t>(m) < n) {
    const std::uint32_t t = static_cast<std::uint32_t>(-n) % n;
    while (static_cast<std::uint32_t>(m) < t) {
      x = rng.next();
      m = (x >> 32) * n;
    }
  }
  const auto i = static_cast<std::uint32_t>(m >> 32);
  const double coin = static_cast<double>(x & 0xFFFFFFFFULL) * 0x1.0p-32;
  return coin < st.alias_prob[i] ? i : st.alias[i];
}

/// Dot product with eight independent partial sums.
template <bool Shared>
inline float dot(const float* a, float* b, std::size_t dim) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t d = 0;
  for (; d + 8 <= dim; d += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[d + j] * load<Shared>(b + d + j);
  float f = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; d < dim; ++d) f += a[d] * load<Shared>(b + d);
  return f;
}

inline constexpr int kSigmoidTable = 1000;
inline constexpr float kMaxExp = 6.0f;

inline const std::vector<float>& sigmoid_table() {
  static const std::vector<float> table = [] {
    std::vector<float> t(kSigmoidTable);
    for (int i = 0; i < kSigmoidTable; ++i) {
      double x = (static_cast<double>(i) / kSigmoidTable * 2.0 - 1.0) * kMaxExp;
      t[static_cast<std::size_t>(i)] = static_cast<float>(1.0 / (1.0 + std::exp(-x)));
    }
    return t;
  }();
  return table;
}

// One worker pass over sentences [s_begin, s_end) for a single epoch.
template <bool Shared>
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
__attribute__((always_inline))
#endif
inline void train_range(const TrainState& st, std::size_t s_begin, std::size_t s_end, Rng& rng,
                        std::atomic<std::uint64_t>& processed, std::uint64_t total_work) {
  const std::size_t dim = st.p.dim;
  const int window = static_cast<int>(st.p.window);
  std::vector<std::uint32_t> sen;
  std::vector<float> neu1e(dim);
  std::vector<float> l1c(dim);
  std::vector<std::uint32_t> targets(2 * st.p.window * st.p.negative);
  const auto& sig = sigmoid_table();
  std::uint64_t local = 0;
  double lr = st.p.initial_lr;
  auto refresh_lr = [&] {
    std::uint64_t done = processed.fetch_add(local, std::memory_order_relaxed) + local;
    local = 0;
    double frac = 1.0 - static_cast<double>(done) / static_cast<double>(total_work + 1);
    lr = st.p.initial_lr * std::max(frac, 1e-4);
  };
  refresh_lr();
  for (std::size_t s = s_begin; s < s_end; ++s) {
    sen.clear();
    for (auto id : st.stream->sentence(s)) {
      auto row = st.remap[id];
      if (row < 0) continue;
      ++local;
      if (st.keep_prob[static_cast<std::size_t>(row)] < 1.0 &&
          st.keep_prob[static_cast<std::size_t>(row)] < rng.uniform())
        continue;
      sen.push_back(static_cast<std::uint32_t>(row));
    }
    const int len = static_cast<int>(sen.size());
    for (int pos = 0; pos < len; ++pos) {
      const std::uint32_t word = sen[static_cast<std::size_t>(pos)];
      const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(window)));
      // Draw every negative for this position first, in the order they are
      // used, so their rows can be prefetched.
      const int lo = std::max(pos - window + b, 0), hi = std::min(pos + window - b, len - 1);
      std::size_t nt = 0;
      for (int c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        for (std::uint32_t n = 1; n <= st.p.negative; ++n) {
          targets[nt] = draw_negative(st, rng);
          __builtin_prefetch(st.syn1 + static_cast<std::size_t>(targets[nt]) * dim);
          ++nt;
        }
      }
      const std::uint32_t* next = targets.data();
      for (int c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        float* l1 = st.syn0 + static_cast<std::size_t>(sen[static_cast<std::size_t>(c)]) * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          neu1e[d] = 0.0f;
          l1c[d] = load<Shared>(l1 + d);
        }
        for (std::uint32_t n = 0; n <= st.p.negative; ++n) {
          const std::uint32_t target = n == 0 ? word : *next++;
          if (n > 0 && target == word) continue;
          const float label = n == 0 ? 1.0f : 0.0f;
          float* l2 = st.syn1 + static_cast<std::size_t>(target) * dim;
          const float f = dot<Shared>(l1c.data(), l2, dim);
          float g;
          if (f >= kMaxExp)
            g = (label - 1.0f) * static_cast<float>(lr);
          else if (f <= -kMaxExp)
            g = label * static_cast<float>(lr);
          else
            g = (label - sig[std::min<std::size_t>(
                             static_cast<std::size_t>((f + kMaxExp) * (kSigmoidTable / kMaxExp / 2.0f)),
                             kSigmoidTable - 1)]) *
                static_cast<float>(lr);
          for (std::size_t d = 0; d < dim; ++d) {
            float w2 = load<Shared>(l2 + d);
            neu1e[d] += g * w2;
            store<Shared>(l2 + d, w2 + g * l1c[d]);
          }
        }
        for (std::size_t d = 0; d < dim; ++d) store<Shared>(l1 + d, load<Shared>(l1 + d) + neu1e[d]);
      }
    }
    if (local >= 10000) refresh_lr();
  }
  processed.fetch_add(local, std::memory_order_relaxed);
}

// Single-worker pass; on x86-64 GCC builds an AVX2 variant is picked at load time when the CPU has it.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
__attribute__((target_clones("avx2", "default")))
#endif
inline void train_range_serial(const TrainState& st, std::size_t s_begin, std::size_t s_end, Rng& rng,
                               std::atomic<std::uint64_t>& processed, std::uint64_t total_work) {
  train_range<false>(st, s_begin, s_end, rng, processed, total_work);
}

}  // namespace detail

/// Skip-gram with negative sampling. Deterministic mode runs one worker and
/// yields bit-identical vectors for identical input and seed; otherwise
/// workers update shared weights without locks.
inline EmbeddingModel train_sgns(const TokenStream& stream, const SgnsParams& params, std::uint64_t seed,
                                 bool deterministic, Period period = Period::T1) {
  if (stream.empty()) throw Error(Errc::InvalidArgument, "token stream is empty");
  if (params.dim == 0) throw Error(Errc::InvalidArgument, "dim must be >= 1");
  if (params.window == 0) throw Error(Errc::InvalidArgument, "window must be >= 1");
  if (params.epochs == 0) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
  if (!(params.initial_lr > 0.0)) throw Error(Errc::InvalidArgument, "initial_lr must be > 0");

  const auto& types = stream.types();
  std::vector<std::uint64_t> tcount(types.size(), 0);
  for (std::size_t s = 0; s < stream.sentences(); ++s)
    for (auto id : stream.sentence(s)) ++tcount[id];

  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < types.size(); ++i)
    if (tcount[i] >= params.min_count) order.push_back(i);
  if (order.empty())
    throw Error(Errc::EmptyVocabulary, "no token occurs at least " + std::to_string(params.min_count) + " times");
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (tcount[a] != tcount[b]) return tcount[a] > tcount[b];
    return types[a] < types[b];
  });

  const std::size_t V = order.size();
  const std::size_t dim = params.dim;
  std::vector<std::string> words(V);
  std::vector<std::uint64_t> counts(V);
  detail::TrainState st;
  st.stream = &stream;
  st.p = params;
  st.remap.assign(types.size(), -1);
  for (std::size_t r = 0; r < V; ++r) {
    words[r] = types[order[r]];
    counts[r] = tcount[order[r]];
    st.remap[order[r]] = static_cast<std::int64_t>(r);
    st.train_words += counts[r];
  }

  st.keep_prob.assign(V, 1.0);
  if (params.subsample > 0.0) {
    const double thr = params.subsample * static_cast<double>(st.train_words);
    for (std::size_t r = 0; r < V; ++r) {
      double c = static_cast<double>(counts[r]);
      st.keep_prob[r] = (std::sqrt(c / thr) + 1.0) * thr / c;
    }
  }
  std::vector<double> neg_weight(V);
  for (std::size_t r = 0; r < V; ++r) neg_weight[r] = std::pow(static_cast<double>(counts[r]), 0.75);
  detail::build_alias(neg_weight, st.alias_prob, st.alias);

  std::vector<float> syn0(V * dim);
  std::vector<float> syn1(V * dim, 0.0f);
  Rng init_rng(derive_seed(seed, 0));
  for (auto& v : syn0) v = static_cast<float>((init_rng.uniform() - 0.5) / static_cast<double>(dim));
  st.syn0 = syn0.data();
  st.syn1 = syn1.data();

  unsigned workers = deterministic ? 1u : (params.threads ? params.threads : default_threads());
  workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, stream.sentences())));
  const std::uint64_t total_work = static_cast<std::uint64_t>(params.epochs) * st.train_words;
  std::atomic<std::uint64_t> processed{0};
  const std::size_t S = stream.sentences();

  for (std::uint32_t ep = 0; ep < params.epochs; ++ep) {
    if (workers == 1) {
      Rng rng(derive_seed(seed, 1 + ep));
      detail::train_range_serial(st, 0, S, rng, processed, total_work);
    } else {
      parallel_for(
          workers,
          [&](std::size_t w) {
            Rng rng(derive_seed(derive_seed(seed, 1 + ep), w));
            std::size_t b = S * w / workers, e = S * (w + 1) / workers;
            detail::train_range<true>(st, b, e, rng, processed, total_work);
          },
          workers);
    }
  }

  // A row can only stay at zero through float underflow; nudge it so every
  // vector has a direction.
  for (std::size_t r = 0; r < V; ++r) {
    bool zero = true;
    for (std::size_t d = 0; d < dim && zero; ++d) zero = syn0[r * dim + d] == 0.0f;
    if (zero) syn0[r * dim] = 1e-6f;
  }
  return EmbeddingModel(std::move(words), std::move(counts), std::move(syn0), params.dim, params, seed, period);
}

// Model persistence.

inline constexpr std::uint32_t kModelVersion = 1;

inline std::string serialize_model(const EmbeddingModel& m) {
  std::string out;
  out.append("SGNS");
  binary::put_u32(out, kModelVersion);
  binary::put_u32(out, m.dim());
  binary::put_u32(out, static_cast<std::uint32_t>(m.size()));
  const auto& p = m.params();
  binary::put_u32(out, p.window);
  binary::put_u32(out, p.negative);
  binary::put_u32(out, p.min_count);
  binary::put_u32(out, p.epochs);
  binary::put_f64(out, p.initial_lr);
  binary::put_f64(out, p.subsample);
  binary::put_u64(out, m.seed());
  binary::put_u8(out, static_cast<std::uint8_t>(m.period()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    binary::put_str(out, m.words()[i]);
    binary::put_u64(out, m.counts()[i]);
  }
  out.reserve(out.size() + m.vectors().size() * 4);
  for (float v : m.vectors()) binary::put_f32(out, v);
  return out;
}

inline EmbeddingModel deserialize_model(std::string_view data) {
  binary::Reader r(data);
  if (r.remaining() < 4 || r.bytes(4) != "SGNS") throw Error(Errc::BadMagic, "not an SGNS model file");
  auto version = r.u32();
  if (version != kModelVersion)
    throw Error(Errc::MissingVersion, "SGNS model version " + std::to_string(version));
  SgnsParams p;
  p.dim = r.u32();
  auto n = r.u32();
  p.window = r.u32();
  p.negative = r.u32();
  p.min_count = r.u32();
  p.epochs = r.u32();
  p.initial_lr = r.f64();
  p.subsample = r.f64();
  auto seed = r.u64();
  auto per = r.u8();
  if (per > 1) throw Error(Errc::UnknownPeriodLabel, "period byte " + std::to_string(per));
  if (p.dim == 0) throw Error(Errc::DimensionMismatch, "dim is 0");
  std::vector<std::string> words(n);
  std::vector<std::uint64_t> counts(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    words[i] = r.str();
    counts[i] = r.u64();
  }
  std::size_t cells = static_cast<std::size_t>(n) * p.dim;
  if (r.remaining() != cells * 4) {
    if (r.remaining() < cells * 4) throw Error(Errc::TruncatedPayload, "vector matrix truncated");
    throw Error(Errc::DimensionMismatch, "trailing bytes after vector matrix");
  }
  std::vector<float> vec(cells);
  for (auto& v : vec) v = r.f32();
  return EmbeddingModel(std::move(words), std::move(counts), std::move(vec), p.dim, p, seed, static_cast<Period>(per));
}

inline void save_model(const EmbeddingModel& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  auto bytes = serialize_model(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::Io, "write failed for " + path.string());
}

inline EmbeddingModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

// Neighborhood density.

struct Neighborhood {
  double nd = 0.0;
  std::vector<double> sims;          // descending
  std::vector<std::size_t> indices;  // row indices of the neighbors
};

/// Mean cosine similarity of the k nearest neighbors of `target` (target
/// excluded). Ties are broken by row index.
inline Neighborhood neighborhood_density(const EmbeddingModel& model, std::string_view target, std::size_t k = 100) {
  auto t = model.find(target);
  if (!t) throw Error(Errc::OutOfVocabulary, "'" + std::string(target) + "' not in vocabulary");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (model.size() <= k)
    throw Error(Errc::VocabTooSmall,
                "vocabulary of " + std::to_string(model.size()) + " words cannot supply " + std::to_string(k) +
                    " neighbors");
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(model.size() - 1);
  for (std::size_t i = 0; i < model.size(); ++i)
    if (i != *t) all.emplace_back(model.cosine(*t, i), i);
  auto cmp = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), cmp);
  Neighborhood out;
  out.sims.reserve(k);
  out.indices.reserve(k);
  double sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    out.sims.push_back(all[i].first);
    out.indices.push_back(all[i].second);
    sum += all[i].first;
  }
  out.nd = sum / static_cast<double>(k);
  return out;
}

inline Neighborhood neighborhood_density(const EmbeddingModel& model, const VocabKey& target, std::size_t k = 100) {
  return neighborhood_density(model, target.str(), k);
}

struct DensityRecord {
  std::string target;
  double nd_t1 = 0.0;
  double nd_t2 = 0.0;
  double delta_nd = 0.0;
  double u_stat = 0.0;
  double p_value = 1.0;
  std::vector<double> run_nd_t1;
  std::vector<double> run_nd_t2;

  bool significant(double alpha = 0.05) const noexcept { return p_value < alpha; }
};

namespace detail {
inline void rankwise_profile(std::span<const EmbeddingModel> models, std::string_view target, std::size_t k,
                             std::vector<double>& avg, std::vector<double>& run_nd) {
  avg.assign(k, 0.0);
  for (const auto& m : models) {
    auto nb = neighborhood_density(m, target, k);
    run_nd.push_back(nb.nd);
    for (std::size_t i = 0; i < k; ++i) avg[i] += nb.sims[i];
  }
  for (auto& v : avg) v /= static_cast<double>(models.size());
}
}  // namespace detail

/// ND change between periods over run-triples. The test compares the two
/// rank-wise averaged similarity profiles; U is reported for the T1 sample.
inline DensityRecord delta_nd(std::span<const EmbeddingModel> models_t1, std::span<const EmbeddingModel> models_t2,
                              std::string_view target, std::size_t k = 100) {
  if (models_t1.empty() || models_t2.empty()) throw Error(Errc::InvalidArgument, "each period needs at least one model");
  DensityRecord rec;
  rec.target = std::string(target);
  std::vector<double> s1, s2;
  detail::rankwise_profile(models_t1, target, k, s1, rec.run_nd_t1);
  detail::rankwise_profile(models_t2, target, k, s2, rec.run_nd_t2);
  rec.nd_t1 = stats::mean(rec.run_nd_t1);
  rec.nd_t2 = stats::mean(rec.run_nd_t2);
  rec.delta_nd = rec.nd_t2 - rec.nd_t1;
  auto u = stats::mann_whitney_u(s1, s2);
  rec.u_stat = u.statistic;
  rec.p_value = u.p_value;
  return rec;
}

inline DensityRecord delta_nd(std::span<const EmbeddingModel> models_t1, std::span<const EmbeddingModel> models_t2,
                              const VocabKey& target, std::size_t k = 100) {
  auto r = delta_nd(models_t1, models_t2, target.str(), k);
  return r;
}

}  // namespace lexshift::embed
