#ifndef DODO_SCORER_HPP_
#define DODO_SCORER_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "transformer.hpp"

namespace dodo {

// Two-layer feedforward producing one selection score per token from its
// feature-layer hidden state. Scores are position-local: s_i depends only on
// the feature vector of token i.
struct ScorerHead {
  Tensor w1, b1;  // (d, d), (d)
  Tensor w2, b2;  // (d, 1), (1)

  // (n, d) features -> (n,) scores.
  Tensor forward(const Tensor& features) const;

  std::vector<std::pair<std::string, Tensor>> named_tensors(const std::string& prefix) const;
  std::vector<Tensor> trainable() const;
};

ScorerHead init_scorer(const ModelConfig& cfg, Rng& rng);

// Feature-layer states for scoring, produced by the frozen feature stack
// (a copy of the initial decoder's first feature_layer blocks, never
// updated). Runs without gradient tracking so no gradient can reach the
// feature producer.
Tensor scorer_features(const TransformerStack& feature_stack, const ModelConfig& cfg,
                       std::span<const int> tokens, std::size_t start_pos);

// Scores from layer-iota states of any forward pass (detached).
Tensor score_states(const ScorerHead& scorer, const LayerStates& states, std::uint32_t feature_layer);

// Selection probabilities: elementwise sigmoid of the scores.
Tensor select_probability(const Tensor& scores);

}  // namespace dodo

#endif  // DODO_SCORER_HPP_
