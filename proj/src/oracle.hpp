#ifndef DODO_ORACLE_HPP_
#define DODO_ORACLE_HPP_

#include <functional>
#include <span>
#include <vector>

#include "model.hpp"
#include "selection.hpp"

namespace dodo {

// Greedy swap search for a near-optimal nugget selection: starting from the
// scorer's pick, each slot in ascending index order tries every unchosen
// index and keeps a replacement whenever it strictly lowers the downstream
// perplexity.

using SelectionEvalFn = std::function<double(const std::vector<std::size_t>&)>;

struct OracleReport {
  std::vector<std::size_t> initial_indices;
  std::vector<std::size_t> best_indices;
  double initial_ppl = 0.0;
  double best_ppl = 0.0;
  double replaced_fraction = 0.0;
  double overlap = 1.0;  // 1 - replaced_fraction
  std::size_t swaps_accepted = 0;
  std::size_t evaluations = 0;
};

OracleReport greedy_optimal_selection(const SelectionEvalFn& eval, std::size_t n,
                                      std::span<const std::size_t> initial);

// Downstream evaluation for the LM oracle: perplexity of the continuation
// decoded from nuggets at the candidate indices of a fixed compressor pass.
SelectionEvalFn make_oracle_eval_fn(const DodoModel& model, std::span<const int> context,
                                    std::span<const int> continuation);

}  // namespace dodo

#endif  // DODO_ORACLE_HPP_
