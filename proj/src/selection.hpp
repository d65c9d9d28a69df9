#ifndef DODO_SELECTION_HPP_
#define DODO_SELECTION_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "config.hpp"
#include "scorer.hpp"
#include "tensor.hpp"
#include "transformer.hpp"

namespace dodo {

// Deterministic nugget selection: TopK with a forced last token for fixed
// contexts, strict threshold for streaming, plus quantile calibration of the
// threshold.

struct Selection {
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> scores;        // matching score values

  std::size_t k() const { return indices.size(); }
};

// k = ceil(n / r), clamped to [1, n].
std::size_t topk_count(std::size_t n, double ratio);

// The last index is always kept; the remaining k-1 slots go to the highest
// scores among the first n-1 positions, ties broken toward the smaller index.
Selection select_topk(std::span<const double> scores, double ratio);

// Index i is selected iff s_i > lambda (strictly).
Selection select_threshold(std::span<const double> scores, double lambda);

// Quantile matching: lambda such that the fraction of pooled scores above it
// is ~1/ratio. Requires at least 100 pooled scores.
double calibrate_threshold(std::span<const double> pooled_scores, double ratio);

struct SelectionMode {
  enum class Kind { kTopK, kThreshold };
  Kind kind = Kind::kTopK;
  double ratio = 1.0;
  double lambda = 0.0;

  static SelectionMode topk(double r) { return {Kind::kTopK, r, 0.0}; }
  static SelectionMode threshold(double lambda) { return {Kind::kThreshold, 1.0, lambda}; }
};

// All-layer hidden states of the selected tokens. `memory.scores` carries the
// differentiable score channel used by the straight-through augmentation.
struct NuggetState {
  Selection selection;
  MemorySegment memory;

  std::size_t k() const { return selection.k(); }
};

// Runs the compressor stack over the tokens, scores them through the frozen
// feature stack, selects per mode, and copies the selected rows of every
// layer into the nugget state.
NuggetState dodo_compress(const TransformerStack& compressor, const ScorerHead& scorer,
                          const TransformerStack& feature_stack, const ModelConfig& cfg,
                          std::span<const int> tokens, std::size_t start_pos, SelectionMode mode);

}  // namespace dodo

#endif  // DODO_SELECTION_HPP_
