#include "compressor.hpp"

namespace dodo {

NuggetState encode(const DodoModel& model, std::span<const int> tokens, double ratio) {
  return dodo_compress(model.compressor, model.scorer, model.features, model.config, tokens, 0,
                       SelectionMode::topk(ratio));
}

ForwardResult decode_conditional(const DodoModel& model, const NuggetState& nuggets,
                                 std::span<const int> y, std::size_t start_pos, StAugMode aug,
                                 const LogitProbe* probe) {
  ForwardOptions opt;
  opt.aug = aug;
  opt.probe = probe;
  std::vector<MemorySegment> memory;
  if (nuggets.k() > 0) memory.push_back(nuggets.memory);
  return transformer_forward(model.decoder, model.config, y, start_pos, memory, opt);
}

Tensor autoencode_loss(const DodoModel& model, std::span<const int> tokens, double ratio,
                       StAugMode aug) {
  const std::size_t n = tokens.size();
  if (n < 2) fail(Errc::kInvalidArg, "autoencode_loss: need at least 2 tokens");
  NuggetState nuggets = encode(model, tokens, ratio);
  std::vector<int> y_in;
  y_in.reserve(n);
  y_in.push_back(Vocab::kSoft);
  y_in.insert(y_in.end(), tokens.begin(), tokens.end() - 1);
  ForwardResult res = decode_conditional(model, nuggets, y_in, n, aug);
  return cross_entropy(res.logits, tokens);
}

Tensor continuation_loss(const DodoModel& model, std::span<const int> w, std::span<const int> y,
                         double ratio, StAugMode aug) {
  if (w.empty() || y.empty()) fail(Errc::kInvalidArg, "continuation_loss: empty input or target");
  NuggetState nuggets = encode(model, w, ratio);
  std::vector<int> y_in;
  y_in.reserve(y.size());
  y_in.push_back(Vocab::kSoft);
  y_in.insert(y_in.end(), y.begin(), y.end() - 1);
  ForwardResult res = decode_conditional(model, nuggets, y_in, w.size(), aug);
  return cross_entropy(res.logits, y);
}

std::vector<int> greedy_reconstruct(const DodoModel& model, const NuggetState& nuggets,
                                    std::size_t len, std::size_t start_pos) {
  NoGradGuard ng;
  std::vector<int> y_in = {Vocab::kSoft};
  std::vector<int> out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    ForwardResult res = decode_conditional(model, nuggets, y_in, start_pos, StAugMode::kOff);
    const std::size_t v = model.config.vocab;
    const double* row = res.logits.data().data() + (y_in.size() - 1) * v;
    std::size_t best = 0;
    for (std::size_t j = 1; j < v; ++j)
      if (row[j] > row[best]) best = j;
    out.push_back(static_cast<int>(best));
    y_in.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace dodo
