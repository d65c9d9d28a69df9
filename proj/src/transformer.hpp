#ifndef DODO_TRANSFORMER_HPP_
#define DODO_TRANSFORMER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace dodo {

// Decoder-only transformer: learned absolute position embeddings, pre-LN
// residual blocks, tanh feedforward of width 4d, causal multi-head attention
// scaled by 1/sqrt(d/H). Hidden states are kept per layer so downstream code
// can subselect them as nuggets and attend over them as memory.

enum class Role : std::uint32_t { kDecoder = 0, kCompressor = 1, kScorer = 2, kFeature = 3 };

std::string role_prefix(Role role);

struct Block {
  Tensor ln1_g, ln1_b;
  Tensor wq, wk, wv, wo;  // (d, d), bias-free
  Tensor ln2_g, ln2_b;
  Tensor ff1, ff1_b;  // (d, 4d), (4d)
  Tensor ff2, ff2_b;  // (4d, d), (d)
};

struct TransformerStack {
  Role role = Role::kDecoder;
  Tensor tok_embed;  // (V, d)
  Tensor pos_embed;  // (max_pos, d)
  std::vector<Block> blocks;
  Tensor lnf_g, lnf_b;  // final norm, absent on headless stacks
  Tensor lm_head;       // (d, V), absent on headless stacks

  bool has_head() const { return lm_head.defined(); }
  std::size_t depth() const { return blocks.size(); }

  std::vector<std::pair<std::string, Tensor>> named_tensors(const std::string& prefix) const;
  std::vector<Tensor> trainable() const;
};

// Per-position hidden states of one forward pass. h[0] is the embedding
// output; h[l], l = 1..L, is the output of block l. Block l consumes h[l-1],
// so memory built from this forward copies h[0..L-1].
struct LayerStates {
  std::vector<Tensor> h;
  std::vector<std::size_t> positions;

  std::size_t layer_count() const { return h.empty() ? 0 : h.size() - 1; }
  std::size_t token_count() const { return positions.size(); }
  const Tensor& layer(std::size_t l) const { return h.at(l); }        // l in [1, L]
  const Tensor& block_input(std::size_t l) const { return h.at(l); }  // l in [0, L)
};

// A run of past states exposed to attention. `layers[l]` holds the block-l
// input vectors of the source forward; entries carrying a score channel take
// part in the straight-through augmentation.
struct MemorySegment {
  std::vector<Tensor> layers;
  std::vector<std::size_t> positions;
  Tensor scores;  // optional (count,)

  std::size_t count() const { return positions.size(); }
  bool scored() const { return scores.defined(); }
};

// Straight-through wiring of attention logits toward scored memory entries:
//   kStopGrad  adds s - StopGrad(s): forward-invariant, routes logit
//              gradients into the scores;
//   kAdditive  adds s itself (the residual-connection variant);
//   kOff       leaves logits untouched.
enum class StAugMode : std::uint32_t { kOff = 0, kStopGrad = 1, kAdditive = 2 };

// Diagnostic hook: perturbs a single attention logit so tests can measure
// d(loss)/d(logit) by finite differences. `key_col` indexes the concatenated
// key axis (memory entries first, then the current tokens).
struct LogitProbe {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t query = 0;
  std::size_t key_col = 0;
  double delta = 0.0;
};

struct ForwardOptions {
  StAugMode aug = StAugMode::kStopGrad;
  const LogitProbe* probe = nullptr;
  bool want_logits = true;
};

struct ForwardResult {
  LayerStates states;
  Tensor logits;  // (t, V) when requested
};

// Causal forward over `tokens` placed at absolute positions
// [start_pos, start_pos + t): each query attends to every memory entry plus
// the causal prefix of the current tokens. Memory positions must all precede
// start_pos.
ForwardResult transformer_forward(const TransformerStack& stack, const ModelConfig& cfg,
                                  std::span<const int> tokens, std::size_t start_pos,
                                  std::span<const MemorySegment> memory,
                                  const ForwardOptions& opt = {});

ForwardResult forward_full(const TransformerStack& stack, const ModelConfig& cfg,
                           std::span<const int> tokens, const ForwardOptions& opt = {});

// Stack construction. Scaled-normal init (std 0.02), output projections
// scaled by 1/sqrt(2L). `depth` defaults to cfg.layers; headless stacks are
// used for scorer features.
TransformerStack init_stack(const ModelConfig& cfg, Rng& rng, Role role,
                            std::size_t depth = 0, bool with_head = true);
TransformerStack clone_stack(const TransformerStack& src, Role role, bool requires_grad,
                             std::size_t depth = 0);

// Builds a memory segment from a previous forward by copying the block-input
// states of the given row indices (bit-identical subselection).
MemorySegment memory_from_states(const LayerStates& states, std::span<const std::size_t> rows);

}  // namespace dodo

#endif  // DODO_TRANSFORMER_HPP_
