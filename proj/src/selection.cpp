#include "selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dodo {

std::size_t topk_count(std::size_t n, double ratio) {
  if (ratio < 1.0) fail(Errc::kInvalidArg, "topk_count: ratio must be >= 1");
  std::size_t k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / ratio - 1e-9));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return k;
}

Selection select_topk(std::span<const double> scores, double ratio) {
  const std::size_t n = scores.size();
  if (n == 0) fail(Errc::kInvalidArg, "select_topk: empty score vector");
  const std::size_t k = topk_count(n, ratio);

  std::vector<std::size_t> order(n - 1);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> picked(order.begin(), order.begin() + (k - 1));
  picked.push_back(n - 1);  // the last token is always selected
  std::sort(picked.begin(), picked.end());

  Selection sel;
  sel.indices = std::move(picked);
  sel.scores.reserve(k);
  for (std::size_t i : sel.indices) sel.scores.push_back(scores[i]);
  return sel;
}

Selection select_threshold(std::span<const double> scores, double lambda) {
  Selection sel;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > lambda) {
      sel.indices.push_back(i);
      sel.scores.push_back(scores[i]);
    }
  }
  return sel;
}

double calibrate_threshold(std::span<const double> pooled_scores, double ratio) {
  if (ratio < 1.0) fail(Errc::kInvalidArg, "calibrate_threshold: ratio must be >= 1");
  const std::size_t n = pooled_scores.size();
  if (n < 100)
    fail(Errc::kCalibration, "calibrate_threshold: sample of " + std::to_string(n) +
                                 " scores is too small (need at least 100)");
  std::vector<double> sorted(pooled_scores.begin(), pooled_scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t target = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) / ratio));
  if (target > n) target = n;
  if (target == n) return sorted.front() - 1.0;  // everything selected
  if (target < 1) target = 1;
  const std::size_t cut = n - target;  // scores strictly above lambda: indices [cut, n)
  return 0.5 * (sorted[cut - 1] + sorted[cut]);
}

NuggetState dodo_compress(const TransformerStack& compressor, const ScorerHead& scorer,
                          const TransformerStack& feature_stack, const ModelConfig& cfg,
                          std::span<const int> tokens, std::size_t start_pos, SelectionMode mode) {
  if (tokens.empty()) fail(Errc::kInvalidArg, "dodo_compress: empty token sequence");

  Tensor features = scorer_features(feature_stack, cfg, tokens, start_pos);
  Tensor score_vec = scorer.forward(features);

  Selection sel = mode.kind == SelectionMode::Kind::kTopK
                      ? select_topk(score_vec.data(), mode.ratio)
                      : select_threshold(score_vec.data(), mode.lambda);

  ForwardOptions opt;
  opt.want_logits = false;
  opt.aug = StAugMode::kOff;
  ForwardResult enc = transformer_forward(compressor, cfg, tokens, start_pos, {}, opt);

  NuggetState out;
  out.memory = memory_from_states(enc.states, sel.indices);
  out.memory.scores = gather_elems(score_vec, sel.indices);
  out.selection = std::move(sel);
  return out;
}

}  // namespace dodo
