// Prints the strongest frequency shifts per POS for an annotated corpus.
//
//   shift_demo corpus.tsv [top_k]

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "lexshift/corpus.hpp"
#include "lexshift/freqstats.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: shift_demo corpus.tsv [top_k]\n";
    return 2;
  }
  std::size_t top_k = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 5;
  try {
    auto corpus = lexshift::parse_corpus(lexshift::read_file(argv[1]));
    auto stats = corpus.stats();
    auto ranking = lexshift::freq::rank_shifts(lexshift::build_shared_vocab(corpus), stats, top_k);
    std::printf("T1 %llu tokens, T2 %llu tokens\n", static_cast<unsigned long long>(stats.tokens_t1),
                static_cast<unsigned long long>(stats.tokens_t2));
    for (const auto& [pos, lists] : ranking) {
      for (auto dir : {lexshift::freq::Direction::rising, lexshift::freq::Direction::falling}) {
        for (const auto& r : lists.list(dir))
          std::printf("%-6s %-8s %-20s %8.2f  %7.1f -> %7.1f per million%s\n",
                      std::string(lexshift::pos_name(pos)).c_str(),
                      std::string(lexshift::freq::direction_name(dir)).c_str(), r.key.c_str(), r.signed_ll,
                      r.freq_t1_pm, r.freq_t2_pm, r.significant ? "" : "  (n.s.)");
      }
    }
  } catch (const lexshift::Error& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 0;
}
