#include "scorer.hpp"

namespace dodo {

Tensor ScorerHead::forward(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != w1.dim(0))
    fail(Errc::kShape, "scorer: features " + shape_str(features.shape()) + " do not match width " +
                           std::to_string(w1.dim(0)));
  Tensor hidden = tanh_op(add_bias_rows(matmul(features, w1), b1));
  Tensor out = add_bias_rows(matmul(hidden, w2), b2);  // (n, 1)
  return reshape(out, {features.dim(0)});
}

std::vector<std::pair<std::string, Tensor>> ScorerHead::named_tensors(
    const std::string& prefix) const {
  return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

std::vector<Tensor> ScorerHead::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors("x"))
    if (t.requires_grad()) out.push_back(t);
  return out;
}

ScorerHead init_scorer(const ModelConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.width;
  ScorerHead s;
  auto normal = [&](std::vector<std::size_t> shape, double stddev) {
    std::size_t n = 1;
    for (std::size_t dim : shape) n *= dim;
    std::vector<double> data(n);
    for (auto& v : data) v = stddev * rng.normal();
    return Tensor::from_data(std::move(shape), std::move(data), true);
  };
  s.w1 = normal({d, d}, 0.02);
  s.b1 = Tensor::from_data({d}, std::vector<double>(d, 0.0), true);
  s.w2 = normal({d, 1}, 0.02);
  s.b2 = Tensor::from_data({1}, {0.0}, true);
  return s;
}

Tensor scorer_features(const TransformerStack& feature_stack, const ModelConfig& cfg,
                       std::span<const int> tokens, std::size_t start_pos) {
  NoGradGuard ng;
  ForwardOptions opt;
  opt.want_logits = false;
  opt.aug = StAugMode::kOff;
  ForwardResult res = transformer_forward(feature_stack, cfg, tokens, start_pos, {}, opt);
  return res.states.h.back();
}

Tensor score_states(const ScorerHead& scorer, const LayerStates& states,
                    std::uint32_t feature_layer) {
  if (feature_layer >= states.h.size())
    fail(Errc::kConfig, "score_states: feature layer " + std::to_string(feature_layer) +
                            " not present in " + std::to_string(states.layer_count()) + " layers");
  return scorer.forward(stop_grad(states.layer(feature_layer)));
}

Tensor select_probability(const Tensor& scores) { return sigmoid(scores); }

}  // namespace dodo
