#pragma once

// Small builders shared by the unit tests.

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "lexshift/corpus.hpp"

namespace lexshift::testing {

#ifndef LEXSHIFT_FIXTURE_DIR
#define LEXSHIFT_FIXTURE_DIR "data/fixture"
#endif

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(LEXSHIFT_FIXTURE_DIR) / name; }

/// Token with a flat dependency tree: token 0 is the root, the rest attach to it.
inline Token tok(std::string form, std::string upos, std::string lemma = "", std::string deprel = "dep",
                 std::string ner = "O") {
  Token t;
  t.lemma = lemma.empty() ? form : lemma;
  t.form = std::move(form);
  t.upos = std::move(upos);
  t.deprel = std::move(deprel);
  t.ner = std::move(ner);
  return t;
}

inline Sentence flat(std::vector<Token> toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    toks[i].head = i == 0 ? -1 : 0;
    if (i == 0 && toks[i].deprel == "dep") toks[i].deprel = "root";
  }
  return toks;
}

/// Sentence from "form/UPOS" words.
inline Sentence words(std::initializer_list<const char*> ws) {
  std::vector<Token> out;
  for (std::string w : ws) {
    auto slash = w.rfind('/');
    out.push_back(tok(w.substr(0, slash), w.substr(slash + 1)));
  }
  return flat(std::move(out));
}

inline Document doc(std::string id, Period p, std::vector<Sentence> sents) {
  return Document{std::move(id), p, std::move(sents)};
}

/// Corpus where each period is a bag of (lemma, upos, count) content words
/// packed into sentences of `per_sentence` tokens, in a fixed shuffled order.
struct Draw {
  std::string lemma;
  std::string upos;
  std::size_t count_t1;
  std::size_t count_t2;
};

inline AnnotatedCorpus bag_corpus(const std::vector<Draw>& draws, std::size_t per_sentence = 10,
                                  std::uint64_t seed = 1) {
  std::vector<Document> docs;
  for (auto p : {Period::T1, Period::T2}) {
    std::vector<Token> bag;
    for (const auto& d : draws)
      for (std::size_t i = 0; i < (p == Period::T1 ? d.count_t1 : d.count_t2); ++i) bag.push_back(tok(d.lemma, d.upos));
    std::mt19937_64 g(seed + static_cast<std::uint64_t>(p));
    std::shuffle(bag.begin(), bag.end(), g);
    std::vector<Sentence> sents;
    for (std::size_t i = 0; i < bag.size(); i += per_sentence) {
      std::vector<Token> s(bag.begin() + static_cast<std::ptrdiff_t>(i),
                           bag.begin() + static_cast<std::ptrdiff_t>(std::min(bag.size(), i + per_sentence)));
      sents.push_back(flat(std::move(s)));
    }
    docs.push_back(doc(p == Period::T1 ? "t1" : "t2", p, std::move(sents)));
  }
  return AnnotatedCorpus(std::move(docs));
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lexshift_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

  std::filesystem::path write(const std::string& rel, const std::string& content) const {
    auto p = path_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace lexshift::testing
