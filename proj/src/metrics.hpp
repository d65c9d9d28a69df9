#ifndef DODO_METRICS_HPP_
#define DODO_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dodo {

struct MetricsReport {
  double subword_ppl = 0.0;
  double word_ppl = 0.0;
  double bleu = 0.0;
  double accuracy = 0.0;
  std::size_t token_count = 0;
  std::size_t word_count = 0;
};

// Corpus BLEU in [0, 1]: 4-gram, uniform weights, brevity penalty. Zero
// n-gram matches are smoothed with 1e-9; n-gram orders longer than the
// candidate contribute precision 1, so identical corpora score exactly 1.
struct BleuAccumulator {
  void add(std::span<const int> candidate, std::span<const int> reference);
  double score() const;

  std::uint64_t matched[4] = {0, 0, 0, 0};
  std::uint64_t total[4] = {0, 0, 0, 0};
  std::uint64_t cand_len = 0;
  std::uint64_t ref_len = 0;
};

double bleu(std::span<const int> candidate, std::span<const int> reference);

// exp(mean NLL) over the given per-position negative log-likelihoods.
double ppl_from_nll(std::span<const double> nll);

// Word-level perplexity: each word's probability is the product of its
// subword probabilities. `word_spans` are [begin, end) index ranges into the
// log-prob vector; excluded words are skipped.
double word_ppl_from_logprobs(std::span<const double> logprob,
                              std::span<const std::pair<std::size_t, std::size_t>> word_spans,
                              const std::unordered_set<std::size_t>& excluded_words = {});

// Answer normalization: standalone English number words become digits
// (runs of adjacent number words are compound phrases and stay untouched),
// punctuation becomes spaces, whitespace collapses, everything lowercases.
struct NormalizedAnswer {
  std::string text;
  std::size_t compound_number_phrases = 0;  // noted, not converted
};
NormalizedAnswer normalize_answer(const std::string& text);

// Containment rule used for accuracy: does the normalized output contain the
// normalized gold answer?
bool answer_matches(const std::string& output, const std::string& gold);

// Token-type frequency among selected tokens vs the whole sample.
struct TypeFrequency {
  std::string token;
  double selected_freq = 0.0;
  double corpus_freq = 0.0;
};
struct SelectionStats {
  std::vector<TypeFrequency> types;  // sorted by selected_freq descending
  double top10_coverage = 0.0;
  std::size_t selected_total = 0;
  std::size_t corpus_total = 0;
};
SelectionStats selection_frequency_stats(std::span<const std::string> selected_tokens,
                                         std::span<const std::string> all_tokens);

}  // namespace dodo

#endif  // DODO_METRICS_HPP_
