#include "stream.hpp"

#include <cmath>

#include "compressor.hpp"

namespace dodo {

namespace {

std::vector<Tensor> single_row_inputs(const LayerStates& states, std::size_t row) {
  std::vector<Tensor> out;
  const std::size_t L = states.layer_count();
  out.reserve(L);
  for (std::size_t l = 0; l < L; ++l) out.push_back(slice_rows(states.block_input(l), row, 1));
  return out;
}

MemorySegment concat_entries(const std::vector<std::vector<Tensor>>& layers,
                             const std::vector<std::size_t>& positions,
                             const std::vector<Tensor>* scores) {
  MemorySegment seg;
  seg.positions = positions;
  for (const auto& layer : layers) seg.layers.push_back(concat_rows(layer));
  if (scores && !scores->empty()) seg.scores = concat_vec(*scores);
  return seg;
}

// Re-encodes an evicted window token under the compressor stack. Strict
// causality: it attends over the existing nuggets and itself, never over
// tokens that arrived later.
void encode_nugget(const DodoModel& model, std::vector<std::vector<Tensor>>& nugget_layers,
                   std::vector<std::size_t>& nugget_positions, std::vector<Tensor>& nugget_scores,
                   int token, std::size_t pos, const Tensor& score_t, StAugMode aug) {
  std::vector<MemorySegment> memory;
  if (!nugget_positions.empty())
    memory.push_back(concat_entries(nugget_layers, nugget_positions, &nugget_scores));
  ForwardOptions opt;
  opt.want_logits = false;
  opt.aug = aug;
  const int toks[1] = {token};
  ForwardResult res = transformer_forward(model.compressor, model.config, toks, pos, memory, opt);
  if (nugget_layers.empty()) nugget_layers.resize(res.states.layer_count());
  for (std::size_t l = 0; l < res.states.layer_count(); ++l)
    nugget_layers[l].push_back(res.states.block_input(l));
  nugget_positions.push_back(pos);
  nugget_scores.push_back(score_t);
}

}  // namespace

MemorySegment StreamState::nugget_segment() const {
  return concat_entries(nugget_layers_, nugget_positions_, &nugget_scores_);
}

MemorySegment StreamState::recent_segment() const {
  MemorySegment seg;
  if (recent_.empty()) return seg;
  const std::size_t L = recent_.front().block_inputs.size();
  seg.layers.resize(L);
  std::vector<std::vector<Tensor>> per_layer(L);
  for (const StreamEntry& e : recent_) {
    seg.positions.push_back(e.pos);
    for (std::size_t l = 0; l < L; ++l) per_layer[l].push_back(e.block_inputs[l]);
  }
  for (std::size_t l = 0; l < L; ++l) seg.layers[l] = concat_rows(per_layer[l]);
  return seg;
}

void stream_advance_boundary(const DodoModel& model, StreamState& state, std::size_t split) {
  while (!state.recent_.empty() && state.recent_.front().pos < split) {
    StreamEntry e = std::move(state.recent_.front());
    state.recent_.pop_front();
    if (e.score > state.lambda_) {
      encode_nugget(model, state.nugget_layers_, state.nugget_positions_, state.nugget_scores_,
                    e.token, e.pos, e.score_t, StAugMode::kOff);
    }
  }
}

Tensor stream_step(const DodoModel& model, StreamState& state, int token, StAugMode aug) {
  NoGradGuard ng;
  const ModelConfig& cfg = model.config;
  const std::size_t pos = state.next_pos_;

  // Arrival score from the frozen feature stack over the current window.
  std::vector<int> window;
  window.reserve(state.recent_.size() + 1);
  for (const StreamEntry& e : state.recent_) window.push_back(e.token);
  window.push_back(token);
  const std::size_t win_start = state.recent_.empty() ? pos : state.recent_.front().pos;
  Tensor feats = scorer_features(model.features, cfg, window, win_start);
  Tensor score_row = model.scorer.forward(slice_rows(feats, window.size() - 1, 1));

  std::vector<MemorySegment> memory;
  if (state.nugget_count() > 0) memory.push_back(state.nugget_segment());
  if (!state.recent_.empty()) memory.push_back(state.recent_segment());
  ForwardOptions opt;
  opt.aug = aug;
  const int toks[1] = {token};
  ForwardResult res = transformer_forward(model.decoder, cfg, toks, pos, memory, opt);

  StreamEntry entry;
  entry.token = token;
  entry.pos = pos;
  entry.block_inputs = single_row_inputs(res.states, 0);
  entry.score = score_row.at(0);
  entry.score_t = score_row;
  state.recent_.push_back(std::move(entry));
  state.next_pos_ = pos + 1;
  stream_advance_boundary(model, state, state.plan_.split_for_query(state.next_pos_));
  return res.logits;
}

MemorySegment pool_block_mean(const LayerStates& states, std::size_t block) {
  if (block < 1) fail(Errc::kInvalidArg, "pool_block_mean: block size must be >= 1");
  const std::size_t m = states.token_count();
  const std::size_t k = (m + block - 1) / block;
  // Pooling as a constant matrix keeps the averaging differentiable.
  std::vector<double> pmat(k * m, 0.0);
  MemorySegment seg;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t lo = i * block;
    const std::size_t hi = std::min(lo + block, m);
    const double w = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t j = lo; j < hi; ++j) pmat[i * m + j] = w;
    seg.positions.push_back(states.positions[hi - 1]);
  }
  Tensor pool = Tensor::from_data({k, m}, std::move(pmat));
  const std::size_t L = states.layer_count();
  seg.layers.reserve(L);
  for (std::size_t l = 0; l < L; ++l) seg.layers.push_back(matmul(pool, states.block_input(l)));
  return seg;
}

Tensor plain_lm_loss(const DodoModel& model, std::span<const int> tokens) {
  if (tokens.size() < 2) fail(Errc::kInvalidArg, "plain_lm_loss: need at least 2 tokens");
  ForwardResult res = forward_full(model.decoder, model.config, tokens.subspan(0, tokens.size() - 1));
  return cross_entropy(res.logits, tokens.subspan(1));
}

namespace {

struct RawCacheEntry {
  int token;
  std::size_t pos;
  std::vector<Tensor> block_inputs;
  double score;
  Tensor score_t;
};

Tensor chunked_threshold_logits(const DodoModel& model, std::span<const int> tokens,
                                SegmentPlan plan, double lambda, StAugMode aug) {
  const ModelConfig& cfg = model.config;
  const std::size_t nq = tokens.size() - 1;
  std::deque<RawCacheEntry> raw;
  std::vector<std::vector<Tensor>> nugget_layers;
  std::vector<std::size_t> nugget_positions;
  std::vector<Tensor> nugget_scores;

  std::vector<Tensor> seg_logits;
  for (std::size_t a = 0; a < nq; a += plan.seg) {
    const std::size_t b = std::min<std::size_t>(a + plan.seg, nq);
    const std::size_t split = plan.split_for_query(a);

    while (!raw.empty() && raw.front().pos < split) {
      RawCacheEntry e = std::move(raw.front());
      raw.pop_front();
      if (e.score > lambda) {
        encode_nugget(model, nugget_layers, nugget_positions, nugget_scores, e.token, e.pos,
                      e.score_t, aug);
      }
    }

    // Arrival scores for the segment's tokens, batched over the raw region.
    Tensor feats = scorer_features(model.features, cfg,
                                   tokens.subspan(split, b - split), split);
    Tensor seg_scores = model.scorer.forward(feats);  // (b - split,)

    std::vector<MemorySegment> memory;
    if (!nugget_positions.empty())
      memory.push_back(concat_entries(nugget_layers, nugget_positions, &nugget_scores));
    if (!raw.empty()) {
      MemorySegment rs;
      const std::size_t L = raw.front().block_inputs.size();
      std::vector<std::vector<Tensor>> per_layer(L);
      for (const RawCacheEntry& e : raw) {
        rs.positions.push_back(e.pos);
        for (std::size_t l = 0; l < L; ++l) per_layer[l].push_back(e.block_inputs[l]);
      }
      for (std::size_t l = 0; l < L; ++l) rs.layers.push_back(concat_rows(per_layer[l]));
      memory.push_back(std::move(rs));
    }

    ForwardOptions opt;
    opt.aug = aug;
    ForwardResult res =
        transformer_forward(model.decoder, cfg, tokens.subspan(a, b - a), a, memory, opt);
    seg_logits.push_back(res.logits);

    for (std::size_t q = a; q < b; ++q) {
      RawCacheEntry e;
      e.token = tokens[q];
      e.pos = q;
      e.block_inputs = single_row_inputs(res.states, q - a);
      const std::size_t row = q - split;
      std::size_t idx[1] = {row};
      e.score_t = gather_elems(seg_scores, idx);
      e.score = e.score_t.at(0);
      raw.push_back(std::move(e));
    }
  }
  return seg_logits.size() == 1 ? seg_logits[0] : concat_rows(seg_logits);
}

Tensor chunked_segmented_logits(const DodoModel& model, std::span<const int> tokens,
                                SegmentPlan plan, SelectionMode mode, LmVariant variant,
                                StAugMode aug) {
  const ModelConfig& cfg = model.config;
  const std::size_t nq = tokens.size() - 1;
  std::vector<Tensor> seg_logits;
  for (std::size_t a = 0; a < nq; a += plan.seg) {
    const std::size_t b = std::min<std::size_t>(a + plan.seg, nq);
    const std::size_t split = variant == LmVariant::kPlain ? 0 : plan.split_for_query(a);
    std::vector<MemorySegment> memory;
    if (split > 0) {
      if (variant == LmVariant::kDodo) {
        NuggetState nug = dodo_compress(model.compressor, model.scorer, model.features, cfg,
                                        tokens.subspan(0, split), 0, mode);
        if (nug.k() > 0) memory.push_back(std::move(nug.memory));
      } else {  // kCompressive
        ForwardOptions hopt;
        hopt.want_logits = false;
        hopt.aug = StAugMode::kOff;
        ForwardResult hist =
            transformer_forward(model.decoder, cfg, tokens.subspan(0, split), 0, {}, hopt);
        const std::size_t block = static_cast<std::size_t>(std::llround(mode.ratio));
        memory.push_back(pool_block_mean(hist.states, std::max<std::size_t>(1, block)));
      }
    }
    ForwardOptions opt;
    opt.aug = aug;
    ForwardResult res =
        transformer_forward(model.decoder, cfg, tokens.subspan(split, b - split), split, memory, opt);
    seg_logits.push_back(slice_rows(res.logits, a - split, b - a));
  }
  return seg_logits.size() == 1 ? seg_logits[0] : concat_rows(seg_logits);
}

}  // namespace

Tensor chunked_lm_logits(const DodoModel& model, std::span<const int> tokens, SegmentPlan plan,
                         SelectionMode mode, LmVariant variant, StAugMode aug) {
  if (tokens.size() < 2) fail(Errc::kInvalidArg, "chunked_lm_logits: need at least 2 tokens");
  if (plan.seg < 1) fail(Errc::kInvalidArg, "chunked_lm_logits: segment length must be >= 1");
  if (variant == LmVariant::kDodo && mode.kind == SelectionMode::Kind::kThreshold)
    return chunked_threshold_logits(model, tokens, plan, mode.lambda, aug);
  return chunked_segmented_logits(model, tokens, plan, mode, variant, aug);
}

Tensor chunked_lm_loss(const DodoModel& model, std::span<const int> tokens, SegmentPlan plan,
                       SelectionMode mode, LmVariant variant, StAugMode aug) {
  Tensor logits = chunked_lm_logits(model, tokens, plan, mode, variant, aug);
  return cross_entropy(logits, tokens.subspan(1));
}

}  // namespace dodo
