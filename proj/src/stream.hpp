#ifndef DODO_STREAM_HPP_
#define DODO_STREAM_HPP_

#include <deque>
#include <span>
#include <vector>

#include "model.hpp"
#include "selection.hpp"

namespace dodo {

// Autoregressive mode. The stream keeps a compressed nugget cache for the
// distant past and an uncompressed window of recent tokens; the boundary
// between them advances in segment quanta (seg = 1 is pure streaming, the
// window then holds at most tau positions). Evicted window tokens whose score
// clears the threshold are re-encoded under the compressor stack, attending
// over the existing nuggets and themselves, and join the cache; the rest are
// dropped. Chunked training computes the same quantities segment-batched, so
// step-wise and batched results agree.

struct SegmentPlan {
  std::uint32_t seg = 1;
  std::uint32_t tau = 16;

  std::size_t split_for_query(std::size_t q) const {
    const std::size_t a = (q / seg) * seg;
    return a > tau ? a - tau : 0;
  }
};

struct StreamEntry {
  int token = 0;
  std::size_t pos = 0;
  std::vector<Tensor> block_inputs;  // L tensors of shape (1, d)
  double score = 0.0;
  Tensor score_t;  // (1,) differentiable score channel
};

class StreamState {
 public:
  StreamState(SegmentPlan plan, double lambda) : plan_(plan), lambda_(lambda) {}

  const SegmentPlan& plan() const { return plan_; }
  double lambda() const { return lambda_; }
  std::size_t next_pos() const { return next_pos_; }
  std::size_t recent_count() const { return recent_.size(); }
  std::size_t nugget_count() const { return nugget_positions_.size(); }
  std::size_t stored_positions() const { return recent_count() + nugget_count(); }
  const std::vector<std::size_t>& nugget_positions() const { return nugget_positions_; }

  MemorySegment nugget_segment() const;
  MemorySegment recent_segment() const;

 private:
  friend Tensor stream_step(const DodoModel& model, StreamState& state, int token,
                            StAugMode aug);
  friend void stream_advance_boundary(const DodoModel& model, StreamState& state,
                                      std::size_t split);

  SegmentPlan plan_;
  double lambda_ = 0.0;
  std::size_t next_pos_ = 0;
  std::deque<StreamEntry> recent_;
  std::vector<std::vector<Tensor>> nugget_layers_;  // [L][k] blocks of (1, d)
  std::vector<std::size_t> nugget_positions_;
  std::vector<Tensor> nugget_scores_;  // k tensors of (1,)
};

// Feeds one token; returns the next-token logits row (1, V). Runs without
// gradient tracking. The boundary advances after the step, so between steps
// the window holds the tau most recent positions (seg = 1).
Tensor stream_step(const DodoModel& model, StreamState& state, int token,
                   StAugMode aug = StAugMode::kStopGrad);

enum class LmVariant { kDodo, kPlain, kCompressive };

// Chunked next-token computation over one document: logits for every query
// position 0..n-2, each scored exactly once; all queries of a segment share
// one split index.
//   threshold mode: streaming-consistent nugget cache (kDodo only);
//   topk mode:     per-segment compression of the distant prefix.
Tensor chunked_lm_logits(const DodoModel& model, std::span<const int> tokens, SegmentPlan plan,
                         SelectionMode mode, LmVariant variant = LmVariant::kDodo,
                         StAugMode aug = StAugMode::kStopGrad);

// Mean next-token cross-entropy over the chunked logits.
Tensor chunked_lm_loss(const DodoModel& model, std::span<const int> tokens, SegmentPlan plan,
                       SelectionMode mode, LmVariant variant = LmVariant::kDodo,
                       StAugMode aug = StAugMode::kStopGrad);

// Full-context causal LM objective (the plain baseline's training loss).
Tensor plain_lm_loss(const DodoModel& model, std::span<const int> tokens);

// Per-layer mean pooling of contiguous blocks of hidden states; the
// compressive baseline's memory. Pooled entries take the position of their
// block's last token.
MemorySegment pool_block_mean(const LayerStates& states, std::size_t block);

}  // namespace dodo

#endif  // DODO_STREAM_HPP_
