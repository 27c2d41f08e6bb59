#pragma once

// Two-period annotated corpus: TSV ingestion, paragraph windows, and the
// shared content-word vocabulary.

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/text.hpp"

namespace lexshift {

enum class Period : std::uint8_t { T1 = 0, T2 = 1 };

constexpr std::string_view period_name(Period p) noexcept { return p == Period::T1 ? "T1" : "T2"; }

inline std::optional<Period> parse_period(std::string_view s) noexcept {
  if (s == "T1" || s == "t1") return Period::T1;
  if (s == "T2" || s == "t2") return Period::T2;
  return std::nullopt;
}

constexpr std::size_t period_index(Period p) noexcept { return static_cast<std::size_t>(p); }

struct Token {
  std::string form;
  std::string lemma;
  std::string upos;
  int head = -1;  // 0-based index within the sentence, -1 for the root
  std::string deprel;
  std::string ner = "O";
};

using Sentence = std::vector<Token>;

struct Document {
  std::string doc_id;
  Period period = Period::T1;
  std::vector<Sentence> sentences;

  std::size_t token_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
};

/// A window of consecutive sentences; views into the owning Document.
struct Paragraph {
  std::string doc_id;
  Period period = Period::T1;
  std::size_t window_index = 0;
  std::span<const Sentence> sentences;

  std::size_t token_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
  std::string id() const { return doc_id + "#" + std::to_string(window_index); }
};

enum class CoarsePos : std::uint8_t { NOUN, VERB, ADJ, ADV };

constexpr std::string_view pos_name(CoarsePos p) noexcept {
  switch (p) {
    case CoarsePos::NOUN: return "NOUN";
    case CoarsePos::VERB: return "VERB";
    case CoarsePos::ADJ: return "ADJ";
    case CoarsePos::ADV: return "ADV";
  }
  return "NOUN";
}

constexpr CoarsePos all_coarse_pos[] = {CoarsePos::NOUN, CoarsePos::VERB, CoarsePos::ADJ, CoarsePos::ADV};

/// Content-word classes only. PROPN and AUX do not map.
inline std::optional<CoarsePos> coarse_pos(std::string_view upos) noexcept {
  if (upos == "NOUN") return CoarsePos::NOUN;
  if (upos == "VERB") return CoarsePos::VERB;
  if (upos == "ADJ") return CoarsePos::ADJ;
  if (upos == "ADV") return CoarsePos::ADV;
  return std::nullopt;
}

struct VocabKey {
  std::string lemma;  // lowercased
  CoarsePos pos = CoarsePos::NOUN;

  auto operator<=>(const VocabKey&) const = default;
  bool operator==(const VocabKey&) const = default;

  /// "lemma_POS", the token form used by the embedding models.
  std::string str() const { return lemma + "_" + std::string(pos_name(pos)); }
};

inline std::optional<VocabKey> parse_vocab_key(std::string_view s) {
  auto us = s.rfind('_');
  if (us == std::string_view::npos) return std::nullopt;
  auto pos = coarse_pos(s.substr(us + 1));
  if (!pos) return std::nullopt;
  return VocabKey{std::string(s.substr(0, us)), *pos};
}

struct VocabKeyHash {
  std::size_t operator()(const VocabKey& k) const noexcept {
    return std::hash<std::string>{}(k.lemma) * 31 + static_cast<std::size_t>(k.pos);
  }
};

struct VocabEntry {
  VocabKey key;
  std::uint64_t count_t1 = 0;
  std::uint64_t count_t2 = 0;

  bool operator==(const VocabEntry&) const = default;
  std::uint64_t count(Period p) const noexcept { return p == Period::T1 ? count_t1 : count_t2; }
};

struct CorpusStats {
  std::uint64_t tokens_t1 = 0;  // all tokens, the per-million denominator
  std::uint64_t tokens_t2 = 0;
  std::uint64_t documents_t1 = 0;
  std::uint64_t documents_t2 = 0;
  std::uint64_t sentences_t1 = 0;
  std::uint64_t sentences_t2 = 0;

  bool operator==(const CorpusStats&) const = default;
  std::uint64_t tokens(Period p) const noexcept { return p == Period::T1 ? tokens_t1 : tokens_t2; }
};

/// Immutable after construction; safe to share read-only across threads.
class AnnotatedCorpus {
 public:
  AnnotatedCorpus() = default;
  explicit AnnotatedCorpus(std::vector<Document> docs) : documents_(std::move(docs)) {
    for (const auto& d : documents_) {
      std::uint64_t n = d.token_count();
      if (d.period == Period::T1) {
        stats_.tokens_t1 += n;
        ++stats_.documents_t1;
        stats_.sentences_t1 += d.sentences.size();
      } else {
        stats_.tokens_t2 += n;
        ++stats_.documents_t2;
        stats_.sentences_t2 += d.sentences.size();
      }
    }
  }

  const std::vector<Document>& documents() const noexcept { return documents_; }
  const CorpusStats& stats() const noexcept { return stats_; }
  std::size_t size() const noexcept { return documents_.size(); }

  bool operator==(const AnnotatedCorpus& o) const {
    if (!(stats_ == o.stats_) || documents_.size() != o.documents_.size()) return false;
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      const auto& a = documents_[i];
      const auto& b = o.documents_[i];
      if (a.doc_id != b.doc_id || a.period != b.period || a.sentences.size() != b.sentences.size()) return false;
      for (std::size_t s = 0; s < a.sentences.size(); ++s) {
        const auto& x = a.sentences[s];
        const auto& y = b.sentences[s];
        if (x.size() != y.size()) return false;
        for (std::size_t t = 0; t < x.size(); ++t) {
          if (x[t].form != y[t].form || x[t].lemma != y[t].lemma || x[t].upos != y[t].upos ||
              x[t].head != y[t].head || x[t].deprel != y[t].deprel || x[t].ner != y[t].ner)
            return false;
        }
      }
    }
    return true;
  }

 private:
  std::vector<Document> documents_;
  CorpusStats stats_;
};

enum class CorpusFormat { annotated_tsv };

namespace detail {

struct LineRef {
  std::size_t number;  // 1-based
  std::string_view text;
};

inline int parse_int(std::string_view s, std::size_t line, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(Errc::MalformedRow, std::string("non-integer ") + what + " '" + std::string(s) + "'", line);
  return v;
}

// Validates heads of a completed sentence: range, single root, no cycles.
inline void validate_sentence(const Sentence& s, std::span<const std::size_t> lines) {
  const int n = static_cast<int>(s.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    int h = s[i].head;
    if (h < -1 || h >= n)
      throw Error(Errc::MalformedRow,
                  "HEAD " + std::to_string(h) + " outside sentence of length " + std::to_string(n), lines[i]);
    if (h == i) throw Error(Errc::MalformedRow, "token is its own head", lines[i]);
    if (h == -1) ++roots;
  }
  if (roots != 1)
    throw Error(Errc::MalformedRow, "sentence has " + std::to_string(roots) + " roots (expected 1)",
                lines.empty() ? 0 : lines[0]);
  for (int i = 0; i < n; ++i) {
    int cur = i;
    int steps = 0;
    while (s[cur].head != -1) {
      cur = s[cur].head;
      if (++steps > n) throw Error(Errc::MalformedRow, "dependency cycle", lines[i]);
    }
  }
}

inline Document parse_document(std::span<const LineRef> lines) {
  Document doc;
  Sentence current;
  std::vector<std::size_t> current_lines;
  std::string current_sent_id;
  bool have_period = false;

  auto flush = [&] {
    if (current.empty()) return;
    validate_sentence(current, current_lines);
    doc.sentences.push_back(std::move(current));
    current = Sentence{};
    current_lines.clear();
    current_sent_id.clear();
  };

  for (const auto& ln : lines) {
    std::string_view row = ln.text;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) {
      flush();
      continue;
    }
    if (row.front() == '#') continue;
    auto f = text::split(row, '\t');
    if (f.size() != 10)
      throw Error(Errc::MalformedRow, "expected 10 tab-separated fields, got " + std::to_string(f.size()),
                  ln.number);
    auto period = parse_period(f[1]);
    if (!period) throw Error(Errc::UnknownPeriodLabel, "'" + std::string(f[1]) + "'", ln.number);
    if (!have_period) {
      doc.doc_id = std::string(f[0]);
      doc.period = *period;
      have_period = true;
    } else if (*period != doc.period) {
      throw Error(Errc::MalformedRow, "document " + doc.doc_id + " changes period", ln.number);
    }
    if (!current.empty() && f[2] != current_sent_id)
      throw Error(Errc::MalformedRow, "SENT_ID changes without a blank line", ln.number);
    int tid = parse_int(f[3], ln.number, "TOKEN_ID");
    if (tid != static_cast<int>(current.size()))
      throw Error(Errc::MalformedRow,
                  "TOKEN_ID " + std::to_string(tid) + " out of sequence (expected " +
                      std::to_string(current.size()) + ")",
                  ln.number);
    if (f[6].empty()) throw Error(Errc::MalformedRow, "empty UPOS", ln.number);
    Token t;
    t.form = std::string(f[4]);
    t.lemma = std::string(f[5]);
    t.upos = std::string(f[6]);
    t.head = parse_int(f[7], ln.number, "HEAD");
    t.deprel = std::string(f[8]);
    t.ner = f[9].empty() ? std::string("O") : std::string(f[9]);
    current_sent_id = std::string(f[2]);
    current.push_back(std::move(t));
    current_lines.push_back(ln.number);
  }
  flush();
  return doc;
}

inline std::string_view first_field(std::string_view row) {
  auto tab = row.find('\t');
  return tab == std::string_view::npos ? row : row.substr(0, tab);
}

}  // namespace detail

/// Parses annotated TSV text. Documents are parsed in parallel; the result
/// does not depend on the thread count.
inline AnnotatedCorpus parse_corpus(std::string_view content, unsigned threads = default_threads()) {
  // Split into lines and group them by document.
  std::vector<detail::LineRef> lines;
  {
    std::size_t start = 0, number = 1;
    while (start <= content.size()) {
      std::size_t end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      if (start < content.size() || end > start) lines.push_back({number, content.substr(start, end - start)});
      if (end == content.size()) break;
      start = end + 1;
      ++number;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end) into lines
  std::unordered_set<std::string_view> seen_ids;
  std::string_view current_id;
  bool in_doc = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view row = lines[i].text;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty() || row.front() == '#') continue;
    std::string_view id = detail::first_field(row);
    if (!in_doc || id != current_id) {
      if (!seen_ids.insert(id).second)
        throw Error(Errc::MalformedRow, "DOC_ID '" + std::string(id) + "' is not contiguous", lines[i].number);
      if (in_doc) ranges.back().second = i;
      ranges.emplace_back(i, lines.size());
      current_id = id;
      in_doc = true;
    }
  }
  if (ranges.empty()) throw Error(Errc::EmptyCorpus, "no data rows");

  std::vector<Document> docs(ranges.size());
  parallel_for(
      ranges.size(),
      [&](std::size_t d) {
        auto [b, e] = ranges[d];
        docs[d] = detail::parse_document(std::span<const detail::LineRef>(lines).subspan(b, e - b));
      },
      threads);
  return AnnotatedCorpus(std::move(docs));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline AnnotatedCorpus load_corpus(const std::filesystem::path& path,
                                   CorpusFormat format = CorpusFormat::annotated_tsv,
                                   unsigned threads = default_threads()) {
  (void)format;
  if (!std::filesystem::exists(path)) throw Error(Errc::Io, "corpus file not found: " + path.string());
  return parse_corpus(read_file(path), threads);
}

/// Serializes back to the annotated TSV format (SENT_ID = sentence ordinal).
inline std::string to_tsv(const AnnotatedCorpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    for (std::size_t s = 0; s < d.sentences.size(); ++s) {
      const auto& sent = d.sentences[s];
      for (std::size_t t = 0; t < sent.size(); ++t) {
        const auto& tok = sent[t];
        out += d.doc_id;
        out += '\t';
        out += period_name(d.period);
        out += '\t' + std::to_string(s) + '\t' + std::to_string(t) + '\t';
        out += tok.form + '\t' + tok.lemma + '\t' + tok.upos + '\t' + std::to_string(tok.head) + '\t';
        out += tok.deprel + '\t' + tok.ner + '\n';
      }
      out += '\n';
    }
  }
  return out;
}

/// Non-overlapping windows of `window` sentences; the last may be shorter.
inline std::vector<Paragraph> segment_paragraphs(const Document& doc, std::size_t window = 5) {
  if (window == 0) throw Error(Errc::InvalidArgument, "paragraph window must be >= 1");
  std::vector<Paragraph> out;
  std::span<const Sentence> all(doc.sentences);
  for (std::size_t start = 0, idx = 0; start < all.size(); start += window, ++idx) {
    std::size_t len = std::min(window, all.size() - start);
    out.push_back(Paragraph{doc.doc_id, doc.period, idx, all.subspan(start, len)});
  }
  return out;
}

inline std::vector<Paragraph> segment_paragraphs(const AnnotatedCorpus& corpus, std::size_t window = 5) {
  std::vector<Paragraph> out;
  for (const auto& d : corpus.documents()) {
    auto p = segment_paragraphs(d, window);
    out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return out;
}

/// The vocabulary key of a token, if it is a qualifying content word.
inline std::optional<VocabKey> content_key(const Token& tok, std::size_t min_len = 3) {
  auto pos = coarse_pos(tok.upos);
  if (!pos) return std::nullopt;
  std::string lemma = text::lower(tok.lemma);
  if (text::codepoint_count(lemma) < min_len || !text::is_alphabetic(lemma)) return std::nullopt;
  return VocabKey{std::move(lemma), *pos};
}

/// Per-period counts of every qualifying content-word key, sorted by key.
inline std::vector<VocabEntry> count_vocab(const AnnotatedCorpus& corpus, std::size_t min_len = 3,
                                           unsigned threads = default_threads()) {
  using Table = std::unordered_map<VocabKey, std::pair<std::uint64_t, std::uint64_t>, VocabKeyHash>;
  const auto& docs = corpus.documents();
  std::vector<Table> partial(docs.size());
  parallel_for(
      docs.size(),
      [&](std::size_t d) {
        auto& table = partial[d];
        for (const auto& sent : docs[d].sentences)
          for (const auto& tok : sent)
            if (auto key = content_key(tok, min_len)) {
              auto& c = table[*key];
              (docs[d].period == Period::T1 ? c.first : c.second) += 1;
            }
      },
      threads);
  Table merged;
  for (auto& t : partial)
    for (auto& [k, c] : t) {
      auto& m = merged[k];
      m.first += c.first;
      m.second += c.second;
    }
  std::vector<VocabEntry> out;
  out.reserve(merged.size());
  for (auto& [k, c] : merged) out.push_back(VocabEntry{k, c.first, c.second});
  std::sort(out.begin(), out.end(), [](const VocabEntry& a, const VocabEntry& b) { return a.key < b.key; });
  return out;
}

/// Content-word keys attested in both periods.
inline std::vector<VocabEntry> build_shared_vocab(const AnnotatedCorpus& corpus, std::size_t min_len = 3,
                                                  unsigned threads = default_threads()) {
  auto all = count_vocab(corpus, min_len, threads);
  std::erase_if(all, [](const VocabEntry& e) { return e.count_t1 == 0 || e.count_t2 == 0; });
  return all;
}

inline std::string vocab_to_tsv(const std::vector<VocabEntry>& vocab) {
  std::string out = "lemma\tpos\tcount_t1\tcount_t2\n";
  for (const auto& e : vocab) {
    out += e.key.lemma + '\t' + std::string(pos_name(e.key.pos)) + '\t' + std::to_string(e.count_t1) + '\t' +
           std::to_string(e.count_t2) + '\n';
  }
  return out;
}

inline std::vector<VocabEntry> vocab_from_tsv(std::string_view content) {
  std::vector<VocabEntry> out;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (line_no == 1 || text::trim(line).empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 4) throw Error(Errc::MalformedRow, "vocab row needs 4 fields", line_no);
    auto pos = coarse_pos(f[1]);
    if (!pos) throw Error(Errc::MalformedRow, "unknown POS '" + std::string(f[1]) + "'", line_no);
    VocabEntry e{VocabKey{std::string(f[0]), *pos}, 0, 0};
    e.count_t1 = static_cast<std::uint64_t>(std::stoull(std::string(f[2])));
    e.count_t2 = static_cast<std::uint64_t>(std::stoull(std::string(f[3])));
    out.push_back(std::move(e));
  }
  return out;
}

/// Token form used by the embedding models: lowercased lemma + "_" + UPOS,
/// so content words match `VocabKey::str()`.
inline std::string embedding_token(const Token& t) { return text::lower(t.lemma) + "_" + t.upos; }

}  // namespace lexshift
