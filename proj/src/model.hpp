#ifndef DODO_MODEL_HPP_
#define DODO_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "scorer.hpp"
#include "selection.hpp"
#include "transformer.hpp"
#include "vocab.hpp"

namespace dodo {

// The full parameter bundle: decoder stack (theta), compressor stack (phi),
// scorer head (varphi), and the frozen feature stack (the initial decoder's
// first feature_layer blocks, never trained). Decoder and compressor start
// from identical weights and diverge in training; the soft-prompt embedding
// is the decoder row of Vocab::kSoft.
struct DodoModel {
  ModelConfig config;
  Vocab vocab;
  TransformerStack decoder;
  TransformerStack compressor;
  ScorerHead scorer;
  TransformerStack features;

  bool initialized() const { return !decoder.blocks.empty(); }

  std::vector<Tensor> trainable_params(bool decoder_only = false) const;
  void zero_grads() const;
};

DodoModel init_model(ModelConfig cfg, Vocab vocab, std::uint64_t seed);

void save_model(const DodoModel& model, const std::string& path);
DodoModel load_model(const std::string& path);

// Nugget-state artifact ("DODN" container).
void save_nugget_state(const NuggetState& nuggets, const ModelConfig& cfg, const std::string& path);
NuggetState load_nugget_state(const std::string& path);

}  // namespace dodo

#endif  // DODO_MODEL_HPP_
