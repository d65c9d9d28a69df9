#ifndef DODO_CORPUS_HPP_
#define DODO_CORPUS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "vocab.hpp"

namespace dodo {

// UTF-8 corpora: one document per line; pair corpora carry two tab-separated
// fields (input, target) per line.
struct Corpus {
  std::vector<std::vector<int>> docs;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;

  bool has_pairs() const { return !pairs.empty(); }
  std::size_t size() const { return has_pairs() ? pairs.size() : docs.size(); }
};

std::string read_text_file(const std::string& path);
std::vector<std::string> split_lines(const std::string& text);

// Tokenizes the lines of `path`; `fit` interns unseen tokens into the vocab.
// Lines containing a tab load as pairs, otherwise as plain documents.
Corpus load_corpus(const std::string& path, Vocab& vocab, bool fit);
Corpus corpus_from_lines(const std::vector<std::string>& lines, Vocab& vocab, bool fit);

// Synthetic desk-scale corpora (64-symbol alphabet).
// Patterned repeats with a sprinkle of random spans; autoencoding material.
std::vector<std::string> synth_patterned(Rng& rng, std::size_t count, std::size_t min_len,
                                         std::size_t max_len);
// Long-range dependency: a keyed fact planted early, queried near the end.
// "k <c><c><c> " + filler words + " q <c>..." where <c> is a random letter.
std::vector<std::string> synth_planted(Rng& rng, std::size_t count, std::size_t filler_words);

}  // namespace dodo

#endif  // DODO_CORPUS_HPP_
