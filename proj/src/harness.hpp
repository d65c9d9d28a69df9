#ifndef DODO_HARNESS_HPP_
#define DODO_HARNESS_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "compressor.hpp"
#include "corpus.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "stream.hpp"

namespace dodo {

// Model-facing evaluation plumbing: reconstruction BLEU, the matched-budget
// LM table, score inspection, and threshold calibration over corpora.

using LogitsFn = std::function<Tensor(std::span<const int>)>;

// exp(mean NLL) of predicting tokens 2..n from the model's logits.
double subword_ppl(const LogitsFn& logits_fn, std::span<const int> tokens);

// Word spans over token range [begin, end): index ranges relative to begin.
// Char scheme: words are maximal runs of non-blank tokens fully inside the
// range; whitespace scheme: every token is a word.
std::vector<std::pair<std::size_t, std::size_t>> word_spans_in_range(
    const Vocab& vocab, std::span<const int> tokens, std::size_t begin, std::size_t end);

struct AutoencodeEval {
  double bleu = 0.0;
  std::size_t docs = 0;
  std::size_t exact = 0;
};
AutoencodeEval eval_autoencode(const DodoModel& model,
                               std::span<const std::vector<int>> docs, double ratio);

// One row of the matched-budget comparison: every prediction exposes exactly
// k + tau states, with k = ceil(distant / ratio).
struct LmEvalRow {
  std::string name;
  double total_states = 0.0;
  double compressed_tokens = 0.0;
  double context_tokens = 0.0;
  double subword_ppl = 0.0;
  double word_ppl = 0.0;
  std::size_t positions = 0;
  std::size_t words = 0;
};
LmEvalRow eval_lm_budget(const DodoModel& model, std::span<const std::vector<int>> docs,
                         LmVariant variant, double ratio, std::uint32_t tau);

// Per-token inspection dump: "token<TAB>score<TAB>selected" lines plus the
// selected/corpus token streams for frequency statistics.
struct InspectResult {
  std::string tsv;
  std::vector<std::string> selected_tokens;
  std::vector<std::string> all_tokens;
};
InspectResult inspect_scores(const DodoModel& model, std::span<const std::vector<int>> docs,
                             SelectionMode mode);

// Pooled-score quantile calibration over a token sample.
struct CalibrationResult {
  double lambda = 0.0;
  std::size_t sample_tokens = 0;
  double selected_fraction = 0.0;  // fraction of the sample above lambda
};
CalibrationResult calibrate_over_corpus(const DodoModel& model,
                                        std::span<const std::vector<int>> docs, double ratio);

// Scores of every token of a document under the frozen feature stack.
std::vector<double> document_scores(const DodoModel& model, std::span<const int> tokens);

}  // namespace dodo

#endif  // DODO_HARNESS_HPP_
