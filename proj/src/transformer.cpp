#include "transformer.hpp"

#include <cmath>

namespace dodo {

namespace {

Tensor normal_tensor(Rng& rng, std::vector<std::size_t> shape, double stddev) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = stddev * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor const_tensor(std::vector<std::size_t> shape, double v) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor::from_data(std::move(shape), std::vector<double>(n, v), true);
}

Tensor copy_tensor(const Tensor& t, bool requires_grad) {
  return Tensor::from_data(t.shape(), t.data(), requires_grad);
}

}  // namespace

std::string role_prefix(Role role) {
  switch (role) {
    case Role::kDecoder: return "dec";
    case Role::kCompressor: return "enc";
    case Role::kScorer: return "scorer";
    case Role::kFeature: return "feat";
  }
  return "?";
}

std::vector<std::pair<std::string, Tensor>> TransformerStack::named_tensors(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back(prefix + ".tok_embed", tok_embed);
  out.emplace_back(prefix + ".pos_embed", pos_embed);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const Block& b = blocks[l];
    const std::string p = prefix + ".block" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1_g", b.ln1_g);
    out.emplace_back(p + "ln1_b", b.ln1_b);
    out.emplace_back(p + "wq", b.wq);
    out.emplace_back(p + "wk", b.wk);
    out.emplace_back(p + "wv", b.wv);
    out.emplace_back(p + "wo", b.wo);
    out.emplace_back(p + "ln2_g", b.ln2_g);
    out.emplace_back(p + "ln2_b", b.ln2_b);
    out.emplace_back(p + "ff1", b.ff1);
    out.emplace_back(p + "ff1_b", b.ff1_b);
    out.emplace_back(p + "ff2", b.ff2);
    out.emplace_back(p + "ff2_b", b.ff2_b);
  }
  if (has_head()) {
    out.emplace_back(prefix + ".lnf_g", lnf_g);
    out.emplace_back(prefix + ".lnf_b", lnf_b);
    out.emplace_back(prefix + ".lm_head", lm_head);
  }
  return out;
}

std::vector<Tensor> TransformerStack::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors("x"))
    if (t.requires_grad()) out.push_back(t);
  return out;
}

TransformerStack init_stack(const ModelConfig& cfg, Rng& rng, Role role, std::size_t depth,
                            bool with_head) {
  if (cfg.vocab == 0) fail(Errc::kConfig, "init_stack: vocabulary size is unset");
  const std::size_t d = cfg.width;
  const std::size_t L = depth == 0 ? cfg.layers : depth;
  const double out_scale = 0.02 / std::sqrt(2.0 * static_cast<double>(cfg.layers));
  TransformerStack s;
  s.role = role;
  s.tok_embed = normal_tensor(rng, {cfg.vocab, d}, 0.02);
  s.pos_embed = normal_tensor(rng, {cfg.max_pos, d}, 0.02);
  s.blocks.resize(L);
  for (Block& b : s.blocks) {
    b.ln1_g = const_tensor({d}, 1.0);
    b.ln1_b = const_tensor({d}, 0.0);
    b.wq = normal_tensor(rng, {d, d}, 0.02);
    b.wk = normal_tensor(rng, {d, d}, 0.02);
    b.wv = normal_tensor(rng, {d, d}, 0.02);
    b.wo = normal_tensor(rng, {d, d}, out_scale);
    b.ln2_g = const_tensor({d}, 1.0);
    b.ln2_b = const_tensor({d}, 0.0);
    b.ff1 = normal_tensor(rng, {d, 4 * d}, 0.02);
    b.ff1_b = const_tensor({4 * d}, 0.0);
    b.ff2 = normal_tensor(rng, {4 * d, d}, out_scale);
    b.ff2_b = const_tensor({d}, 0.0);
  }
  if (with_head) {
    s.lnf_g = const_tensor({d}, 1.0);
    s.lnf_b = const_tensor({d}, 0.0);
    s.lm_head = normal_tensor(rng, {d, cfg.vocab}, 0.02);
  }
  return s;
}

TransformerStack clone_stack(const TransformerStack& src, Role role, bool requires_grad,
                             std::size_t depth) {
  const std::size_t L = depth == 0 ? src.blocks.size() : depth;
  if (L > src.blocks.size()) fail(Errc::kInvalidArg, "clone_stack: depth exceeds source");
  TransformerStack s;
  s.role = role;
  s.tok_embed = copy_tensor(src.tok_embed, requires_grad);
  s.pos_embed = copy_tensor(src.pos_embed, requires_grad);
  s.blocks.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const Block& a = src.blocks[l];
    Block& b = s.blocks[l];
    b.ln1_g = copy_tensor(a.ln1_g, requires_grad);
    b.ln1_b = copy_tensor(a.ln1_b, requires_grad);
    b.wq = copy_tensor(a.wq, requires_grad);
    b.wk = copy_tensor(a.wk, requires_grad);
    b.wv = copy_tensor(a.wv, requires_grad);
    b.wo = copy_tensor(a.wo, requires_grad);
    b.ln2_g = copy_tensor(a.ln2_g, requires_grad);
    b.ln2_b = copy_tensor(a.ln2_b, requires_grad);
    b.ff1 = copy_tensor(a.ff1, requires_grad);
    b.ff1_b = copy_tensor(a.ff1_b, requires_grad);
    b.ff2 = copy_tensor(a.ff2, requires_grad);
    b.ff2_b = copy_tensor(a.ff2_b, requires_grad);
  }
  if (L == src.blocks.size() && src.has_head()) {
    s.lnf_g = copy_tensor(src.lnf_g, requires_grad);
    s.lnf_b = copy_tensor(src.lnf_b, requires_grad);
    s.lm_head = copy_tensor(src.lm_head, requires_grad);
  }
  return s;
}

MemorySegment memory_from_states(const LayerStates& states, std::span<const std::size_t> rows) {
  MemorySegment seg;
  const std::size_t L = states.layer_count();
  seg.layers.reserve(L);
  for (std::size_t l = 0; l < L; ++l) seg.layers.push_back(gather_rows(states.block_input(l), rows));
  seg.positions.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= states.token_count()) fail(Errc::kIndex, "memory_from_states: row out of range");
    seg.positions.push_back(states.positions[r]);
  }
  return seg;
}

ForwardResult transformer_forward(const TransformerStack& stack, const ModelConfig& cfg,
                                  std::span<const int> tokens, std::size_t start_pos,
                                  std::span<const MemorySegment> memory,
                                  const ForwardOptions& opt) {
  const std::size_t t = tokens.size();
  if (t == 0) fail(Errc::kInvalidArg, "forward: empty token sequence");
  if (start_pos + t > cfg.max_pos)
    fail(Errc::kLength, "forward: sequence reaches position " + std::to_string(start_pos + t) +
                            " beyond max_pos " + std::to_string(cfg.max_pos));
  const std::size_t L = stack.depth();
  const std::size_t H = cfg.heads;
  const std::size_t dh = cfg.head_width();

  std::size_t mem_total = 0;
  for (const MemorySegment& seg : memory) {
    if (seg.layers.size() < L) fail(Errc::kShape, "forward: memory is shallower than the stack");
    for (std::size_t p : seg.positions)
      if (p >= start_pos)
        fail(Errc::kPosition, "forward: memory position " + std::to_string(p) +
                                  " does not precede start position " + std::to_string(start_pos));
    if (seg.scored() && seg.scores.size() != seg.count())
      fail(Errc::kShape, "forward: score channel length " + std::to_string(seg.scores.size()) +
                             " does not match " + std::to_string(seg.count()) + " memory entries");
    mem_total += seg.count();
  }
  const std::size_t cols = mem_total + t;

  // Token + position embeddings.
  std::vector<std::size_t> tok_ids(t), pos_ids(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab)
      fail(Errc::kIndex, "forward: token id " + std::to_string(tokens[i]) + " out of range");
    tok_ids[i] = static_cast<std::size_t>(tokens[i]);
    pos_ids[i] = start_pos + i;
  }

  ForwardResult out;
  out.states.positions = pos_ids;
  out.states.h.reserve(L + 1);
  out.states.h.push_back(add(gather_rows(stack.tok_embed, tok_ids), gather_rows(stack.pos_embed, pos_ids)));

  // Causal visibility: all memory, then current tokens up to the query.
  std::vector<std::uint8_t> mask(t * cols, 0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < mem_total + i + 1; ++j) mask[i * cols + j] = 1;
  }

  // One score-augmentation matrix shared by every layer and head, so the
  // backward pass aggregates logit gradients across all of them (and across
  // queries via the scatter).
  Tensor aug;
  if (opt.aug != StAugMode::kOff) {
    std::vector<Tensor> pieces;
    std::size_t off = 0;
    for (const MemorySegment& seg : memory) {
      if (seg.scored()) {
        Tensor delta = opt.aug == StAugMode::kStopGrad ? sub(seg.scores, stop_grad(seg.scores))
                                                       : seg.scores;
        pieces.push_back(scatter_cols(delta, t, cols, off));
      }
      off += seg.count();
    }
    if (!pieces.empty()) {
      aug = pieces[0];
      for (std::size_t i = 1; i < pieces.size(); ++i) aug = add(aug, pieces[i]);
    }
  }

  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < L; ++l) {
    const Block& b = stack.blocks[l];
    const Tensor& x = out.states.h[l];
    Tensor q_in = layer_norm(x, b.ln1_g, b.ln1_b);
    Tensor kv_in;
    if (mem_total == 0) {
      kv_in = q_in;
    } else {
      std::vector<Tensor> parts;
      parts.reserve(memory.size() + 1);
      for (const MemorySegment& seg : memory)
        parts.push_back(layer_norm(seg.layers[l], b.ln1_g, b.ln1_b));
      parts.push_back(q_in);
      kv_in = concat_rows(parts);
    }
    Tensor Q = matmul(q_in, b.wq);
    Tensor K = matmul(kv_in, b.wk);
    Tensor V = matmul(kv_in, b.wv);
    std::vector<Tensor> head_ctx;
    head_ctx.reserve(H);
    for (std::size_t hh = 0; hh < H; ++hh) {
      Tensor qh = slice_cols(Q, hh * dh, dh);
      Tensor kh = slice_cols(K, hh * dh, dh);
      Tensor vh = slice_cols(V, hh * dh, dh);
      Tensor logits = scale(matmul(qh, transpose(kh)), att_scale);
      if (aug.defined()) logits = add(logits, aug);
      if (opt.probe && opt.probe->layer == l && opt.probe->head == hh)
        logits = add_const_at(logits, opt.probe->query, opt.probe->key_col, opt.probe->delta);
      Tensor probs = softmax_rows(logits, &mask);
      head_ctx.push_back(matmul(probs, vh));
    }
    Tensor ctx = concat_cols(head_ctx);
    Tensor a = add(x, matmul(ctx, b.wo));
    Tensor ff_in = layer_norm(a, b.ln2_g, b.ln2_b);
    Tensor ff = add_bias_rows(matmul(tanh_op(add_bias_rows(matmul(ff_in, b.ff1), b.ff1_b)), b.ff2), b.ff2_b);
    out.states.h.push_back(add(a, ff));
  }

  if (opt.want_logits) {
    if (!stack.has_head()) fail(Errc::kState, "forward: stack has no LM head");
    out.logits = matmul(layer_norm(out.states.h[L], stack.lnf_g, stack.lnf_b), stack.lm_head);
  }
  return out;
}

ForwardResult forward_full(const TransformerStack& stack, const ModelConfig& cfg,
                           std::span<const int> tokens, const ForwardOptions& opt) {
  return transformer_forward(stack, cfg, tokens, 0, {}, opt);
}

}  // namespace dodo
