#ifndef DODO_COMPRESSOR_HPP_
#define DODO_COMPRESSOR_HPP_

#include <span>
#include <vector>

#include "model.hpp"
#include "selection.hpp"

namespace dodo {

// Fixed-context compression: the compressor stack encodes w into k = ceil(n/r)
// nuggets, the decoder stack generates conditioned on them. Autoencoding
// prepends the trainable soft-prompt token to the decoding sequence.

NuggetState encode(const DodoModel& model, std::span<const int> tokens, double ratio);

// Decoder forward over y attending to the nuggets at every layer plus its own
// causal prefix. y is placed right after the compressed context.
ForwardResult decode_conditional(const DodoModel& model, const NuggetState& nuggets,
                                 std::span<const int> y, std::size_t start_pos,
                                 StAugMode aug = StAugMode::kStopGrad,
                                 const LogitProbe* probe = nullptr);

// Reconstruction objective: encode w, decode [soft, w_1..w_{n-1}] against
// targets w_1..w_n with the straight-through channel active.
Tensor autoencode_loss(const DodoModel& model, std::span<const int> tokens, double ratio,
                       StAugMode aug = StAugMode::kStopGrad);

// Continuation objective for (w, y) pairs: decode [soft, y_1..y_{m-1}]
// against y conditioned on the compressed w.
Tensor continuation_loss(const DodoModel& model, std::span<const int> w, std::span<const int> y,
                         double ratio, StAugMode aug = StAugMode::kStopGrad);

// Greedy decoding of `len` tokens from the soft prompt, conditioned on the
// nuggets. Ties break toward the smaller token id.
std::vector<int> greedy_reconstruct(const DodoModel& model, const NuggetState& nuggets,
                                    std::size_t len, std::size_t start_pos);

}  // namespace dodo

#endif  // DODO_COMPRESSOR_HPP_
