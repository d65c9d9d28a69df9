#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "compressor.hpp"

namespace dodo {

OracleReport greedy_optimal_selection(const SelectionEvalFn& eval, std::size_t n,
                                      std::span<const std::size_t> initial) {
  OracleReport rep;
  rep.initial_indices.assign(initial.begin(), initial.end());
  std::vector<std::size_t> current = rep.initial_indices;
  const std::size_t k = current.size();
  if (k > n) fail(Errc::kInvalidArg, "oracle: k exceeds n");

  double best = eval(current);
  ++rep.evaluations;
  rep.initial_ppl = best;

  auto contains = [](const std::vector<std::size_t>& v, std::size_t x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };

  for (std::size_t slot = 0; slot < k; ++slot) {
    std::size_t occupant = rep.initial_indices[slot];
    for (std::size_t cand = 0; cand < n; ++cand) {
      if (contains(current, cand)) continue;
      std::vector<std::size_t> trial = current;
      *std::find(trial.begin(), trial.end(), occupant) = cand;
      std::sort(trial.begin(), trial.end());
      const double ppl = eval(trial);
      ++rep.evaluations;
      if (ppl < best) {  // strict improvement makes the replacement permanent
        best = ppl;
        current = std::move(trial);
        occupant = cand;
        ++rep.swaps_accepted;
      }
    }
  }

  rep.best_indices = current;
  rep.best_ppl = best;
  std::size_t replaced = 0;
  for (std::size_t i : rep.initial_indices)
    if (!contains(current, i)) ++replaced;
  rep.replaced_fraction = k == 0 ? 0.0 : static_cast<double>(replaced) / static_cast<double>(k);
  rep.overlap = 1.0 - rep.replaced_fraction;
  return rep;
}

SelectionEvalFn make_oracle_eval_fn(const DodoModel& model, std::span<const int> context,
                                    std::span<const int> continuation) {
  if (context.empty() || continuation.empty())
    fail(Errc::kInvalidArg, "oracle: context and continuation must be nonempty");
  // The compressor pass is fixed; candidates only re-pick rows from it.
  auto states = std::make_shared<LayerStates>([&] {
    NoGradGuard ng;
    ForwardOptions opt;
    opt.want_logits = false;
    opt.aug = StAugMode::kOff;
    return transformer_forward(model.compressor, model.config, context, 0, {}, opt).states;
  }());
  std::vector<int> y_in;
  y_in.push_back(Vocab::kSoft);
  y_in.insert(y_in.end(), continuation.begin(), continuation.end() - 1);
  std::vector<int> targets(continuation.begin(), continuation.end());
  const std::size_t start = context.size();

  return [&model, states, y_in, targets, start](const std::vector<std::size_t>& indices) {
    NoGradGuard ng;
    MemorySegment mem = memory_from_states(*states, indices);
    std::vector<MemorySegment> memory;
    if (mem.count() > 0) memory.push_back(std::move(mem));
    ForwardOptions opt;
    opt.aug = StAugMode::kOff;
    ForwardResult res = transformer_forward(model.decoder, model.config, y_in, start, memory, opt);
    return std::exp(cross_entropy(res.logits, targets).value());
  };
}

}  // namespace dodo
