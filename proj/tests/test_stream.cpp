#include <cmath>

#include "doctest.h"
#include "stream.hpp"
#include "test_util.hpp"

using namespace dodo;
using namespace dodo::testing;

namespace {

double median_score(const DodoModel& m, std::span<const int> tokens) {
  NoGradGuard ng;
  Tensor f = scorer_features(m.features, m.config, tokens, 0);
  std::vector<double> s = m.scorer.forward(f).data();
  std::sort(s.begin(), s.end());
  return s[s.size() / 2];
}

}  // namespace

TEST_CASE("window covering the whole stream reproduces forward_full") {
  DodoModel m = tiny_model(2, 16, 2, 10, 128);
  Rng rng(71);
  std::vector<int> tokens = random_tokens(rng, m, 20);
  ForwardResult whole = forward_full(m.decoder, m.config, tokens);

  StreamState state({1, 64}, 1e9);
  double md = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Tensor row = stream_step(m, state, tokens[t]);
    for (std::size_t j = 0; j < m.config.vocab; ++j)
      md = std::max(md, std::fabs(row.at(0, j) - whole.logits.at(t, j)));
  }
  CHECK(md < 1e-8);
  CHECK(state.nugget_count() == 0);
}

TEST_CASE("threshold above every score leaves a sliding-window LM") {
  DodoModel m = tiny_model();
  Rng rng(72);
  std::vector<int> tokens = random_tokens(rng, m, 40);
  StreamState state({1, 6}, 1e9);
  for (int tok : tokens) stream_step(m, state, tok);
  CHECK(state.nugget_count() == 0);
  CHECK(state.recent_count() <= 6);
}

TEST_CASE("state size bound: stored positions <= tau + selected count") {
  DodoModel m = tiny_model(2, 16, 2, 12, 300);
  Rng rng(73);
  std::vector<int> tokens = random_tokens(rng, m, 120);
  const double lambda = median_score(m, tokens);
  const std::uint32_t tau = 8;
  StreamState state({1, tau}, lambda);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    stream_step(m, state, tokens[t]);
    CHECK(state.recent_count() <= tau);
    CHECK(state.stored_positions() <= tau + state.nugget_count());
  }
  CHECK(state.nugget_count() > 0);
  // every nugget position precedes every window position
  for (std::size_t p : state.nugget_positions())
    CHECK(p + tau < state.next_pos());
}

TEST_CASE("eviction monotonicity: lowering the threshold never shrinks the cache") {
  DodoModel m = tiny_model(2, 16, 2, 12, 300);
  Rng rng(74);
  std::vector<int> tokens = random_tokens(rng, m, 80);
  const double mid = median_score(m, tokens);
  StreamState low({1, 8}, mid - 0.5 * std::fabs(mid) - 0.01);
  StreamState high({1, 8}, mid);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    stream_step(m, low, tokens[t]);
    stream_step(m, high, tokens[t]);
    CHECK(low.nugget_count() >= high.nugget_count());
  }
}

TEST_CASE("streaming equals batched chunked computation (threshold mode)") {
  Rng rng(75);
  for (int trial = 0; trial < 2; ++trial) {
    DodoModel m = tiny_model(2, 16, 2, 12, 300, 1, 900 + trial);
    std::vector<int> tokens = random_tokens(rng, m, 90);
    const double lambda = median_score(m, tokens);
    const SegmentPlan plan{16, 8};

    NoGradGuard ng;
    Tensor batched = chunked_lm_logits(m, tokens, plan, SelectionMode::threshold(lambda));
    REQUIRE(batched.dim(0) == tokens.size() - 1);

    StreamState state(plan, lambda);
    double md = 0.0;
    for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
      Tensor row = stream_step(m, state, tokens[t]);
      for (std::size_t j = 0; j < m.config.vocab; ++j)
        md = std::max(md, std::fabs(row.at(0, j) - batched.at(t, j)));
    }
    CHECK(md < 1e-8);
  }
}

TEST_CASE("one segment with split 0 equals the plain LM loss") {
  DodoModel m = tiny_model(2, 16, 2, 10, 128);
  Rng rng(76);
  std::vector<int> tokens = random_tokens(rng, m, 24);
  const SegmentPlan plan{64, 64};
  const double plain = plain_lm_loss(m, tokens).value();
  for (auto mode : {SelectionMode::topk(4.0), SelectionMode::threshold(0.0)}) {
    const double chunked = chunked_lm_loss(m, tokens, plan, mode).value();
    CHECK(std::fabs(chunked - plain) < 1e-12);
  }
}

TEST_CASE("every query position is scored exactly once regardless of seg") {
  DodoModel m = tiny_model(2, 16, 2, 10, 256);
  Rng rng(77);
  std::vector<int> tokens = random_tokens(rng, m, 50);
  for (std::uint32_t seg : {4u, 8u, 16u}) {
    Tensor logits = chunked_lm_logits(m, tokens, {seg, 6}, SelectionMode::topk(3.0));
    CHECK(logits.dim(0) == tokens.size() - 1);
    CHECK(std::isfinite(chunked_lm_loss(m, tokens, {seg, 6}, SelectionMode::topk(3.0)).value()));
  }
}

TEST_CASE("compressive pooling: identity at block 1, exact means otherwise") {
  DodoModel m = tiny_model();
  Rng rng(78);
  std::vector<int> tokens = random_tokens(rng, m, 12);
  ForwardOptions opt;
  opt.want_logits = false;
  ForwardResult res = transformer_forward(m.decoder, m.config, tokens, 0, {}, opt);

  MemorySegment ident = pool_block_mean(res.states, 1);
  CHECK(ident.count() == tokens.size());
  for (std::size_t l = 0; l < m.config.layers; ++l)
    CHECK(max_abs_diff(ident.layers[l].data(), res.states.block_input(l).data()) == 0.0);

  MemorySegment pooled = pool_block_mean(res.states, 4);
  CHECK(pooled.count() == 3);
  // brute-force mean oracle
  for (std::size_t l = 0; l < m.config.layers; ++l) {
    const Tensor& src = res.states.block_input(l);
    for (std::size_t blk = 0; blk < 3; ++blk)
      for (std::size_t j = 0; j < m.config.width; ++j) {
        double mean = 0.0;
        for (std::size_t row = blk * 4; row < blk * 4 + 4; ++row) mean += src.at(row, j);
        mean /= 4.0;
        CHECK(pooled.layers[l].at(blk, j) == doctest::Approx(mean).epsilon(1e-12));
      }
  }
  CHECK(pooled.positions == std::vector<std::size_t>{3, 7, 11});

  // a block of identical vectors pools to that vector
  LayerStates constant;
  constant.positions = {0, 1, 2, 3};
  for (std::size_t l = 0; l < 3; ++l)
    constant.h.push_back(Tensor::from_data({4, 2}, {5, 6, 5, 6, 5, 6, 5, 6}));
  MemorySegment cp = pool_block_mean(constant, 4);
  CHECK(cp.layers[0].at(0, 0) == 5.0);
  CHECK(cp.layers[0].at(0, 1) == 6.0);
}

TEST_CASE("compressive and plain variants of the chunked loss run end to end") {
  DodoModel m = tiny_model(2, 16, 2, 10, 256);
  Rng rng(79);
  std::vector<int> tokens = random_tokens(rng, m, 48);
  const SegmentPlan plan{8, 4};
  const double dodo = chunked_lm_loss(m, tokens, plan, SelectionMode::topk(4.0)).value();
  const double comp =
      chunked_lm_loss(m, tokens, plan, SelectionMode::topk(4.0), LmVariant::kCompressive).value();
  const double plain =
      chunked_lm_loss(m, tokens, plan, SelectionMode::topk(4.0), LmVariant::kPlain).value();
  CHECK(std::isfinite(dodo));
  CHECK(std::isfinite(comp));
  CHECK(std::fabs(plain - plain_lm_loss(m, tokens).value()) < 1e-12);
}
