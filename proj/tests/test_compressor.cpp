#include <cmath>

#include "compressor.hpp"
#include "doctest.h"
#include "test_util.hpp"
#include "train.hpp"

using namespace dodo;
using namespace dodo::testing;

TEST_CASE("encode counts follow k = ceil(n / r)") {
  DodoModel m = tiny_model(2, 16, 2, 12, 1100);
  Rng rng(31);
  CHECK(encode(m, random_tokens(rng, m, 100), 10.0).k() == 10);
  CHECK(encode(m, random_tokens(rng, m, 512), 20.0).k() == 26);
  NuggetState one = encode(m, random_tokens(rng, m, 7), 10.0);
  CHECK(one.k() == 1);
  CHECK(one.selection.indices == std::vector<std::size_t>{6});
}

TEST_CASE("r=1 with shared parameters reproduces the uncompressed continuation") {
  // decoder and compressor are identical at init
  Rng rng(32);
  for (int trial = 0; trial < 3; ++trial) {
    DodoModel m = tiny_model(3, 24, 2, 10, 160, 1, 700 + trial);
    std::vector<int> all = random_tokens(rng, m, 18);
    const std::size_t cut = 10;
    std::vector<int> w(all.begin(), all.begin() + cut);
    std::vector<int> y(all.begin() + cut, all.end());

    NuggetState nuggets = encode(m, w, 1.0);
    REQUIRE(nuggets.k() == w.size());
    ForwardResult cond = decode_conditional(m, nuggets, y, cut);
    ForwardResult whole = forward_full(m.decoder, m.config, all);
    double md = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = 0; j < m.config.vocab; ++j)
        md = std::max(md, std::fabs(cond.logits.at(i, j) - whole.logits.at(cut + i, j)));
    CHECK(md < 1e-8);
  }
}

TEST_CASE("soft prompt alone yields one logit row") {
  DodoModel m = tiny_model();
  Rng rng(33);
  std::vector<int> w = random_tokens(rng, m, 8);
  NuggetState nuggets = encode(m, w, 4.0);
  std::vector<int> y_in = {Vocab::kSoft};
  ForwardResult res = decode_conditional(m, nuggets, y_in, w.size());
  CHECK(res.logits.dim(0) == 1);
  CHECK(res.logits.dim(1) == m.config.vocab);
}

TEST_CASE("decoder output depends only on the nugget state, not raw encoder rows") {
  DodoModel m = tiny_model();
  Rng rng(34);
  std::vector<int> w = random_tokens(rng, m, 10);
  std::vector<int> y = random_tokens(rng, m, 4);

  Tensor features = scorer_features(m.features, m.config, w, 0);
  Tensor score_vec = m.scorer.forward(features);
  Selection sel = select_topk(score_vec.data(), 5.0);
  ForwardOptions eopt;
  eopt.want_logits = false;
  ForwardResult enc = transformer_forward(m.compressor, m.config, w, 0, {}, eopt);

  MemorySegment mem_a = memory_from_states(enc.states, sel.indices);
  // clobber the unselected encoder rows, re-subselect, decode again
  for (std::size_t l = 0; l <= m.config.layers; ++l) {
    Tensor& t = enc.states.h[l];
    for (std::size_t row = 0; row < w.size(); ++row) {
      if (std::find(sel.indices.begin(), sel.indices.end(), row) != sel.indices.end()) continue;
      for (std::size_t j = 0; j < m.config.width; ++j) t.data()[row * m.config.width + j] = 7.7;
    }
  }
  MemorySegment mem_b = memory_from_states(enc.states, sel.indices);

  auto decode_with = [&](const MemorySegment& mem) {
    std::vector<MemorySegment> memory = {mem};
    ForwardOptions opt;
    opt.aug = StAugMode::kOff;
    return transformer_forward(m.decoder, m.config, y, w.size(), memory, opt).logits;
  };
  CHECK(max_abs_diff(decode_with(mem_a).data(), decode_with(mem_b).data()) == 0.0);
}

TEST_CASE("causality over the decoding sequence") {
  DodoModel m = tiny_model();
  Rng rng(35);
  std::vector<int> w = random_tokens(rng, m, 8);
  std::vector<int> y = random_tokens(rng, m, 6);
  NuggetState nuggets = encode(m, w, 2.0);
  ForwardResult base = decode_conditional(m, nuggets, y, w.size());
  std::vector<int> y2 = y;
  y2[4] = y2[4] == Vocab::kReserved ? Vocab::kReserved + 1 : Vocab::kReserved;
  ForwardResult alt = decode_conditional(m, nuggets, y2, w.size());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < m.config.vocab; ++j)
      CHECK(base.logits.at(i, j) == alt.logits.at(i, j));
}

TEST_CASE("autoencode loss is finite and decreases over a short run" * doctest::timeout(300)) {
  DodoModel m = tiny_model(2, 24, 2, 12, 96, 1, 40);
  Rng crng(41);
  Vocab fresh(TokenScheme::kChar);
  Corpus corpus = corpus_from_lines(synth_patterned(crng, 16, 10, 14), fresh, true);
  m = init_model(m.config, fresh, 40);

  TrainOptions opt;
  opt.steps = 600;
  opt.lr = 1e-3;
  opt.warmup = 60;
  opt.log_every = 100;
  opt.seed = 4;
  opt.mode = SelectionMode::topk(2.0);
  TrainStats stats = train_compressor(m, corpus, opt);
  REQUIRE(stats.log.size() >= 4);
  for (const auto& e : stats.log) CHECK(std::isfinite(e.loss));
  // smoothed trend: last window well below the first
  CHECK(stats.log.back().loss < 0.8 * stats.log.front().loss);
}

TEST_CASE("single-pair overfit drives the loss near zero" * doctest::timeout(300)) {
  DodoModel m = tiny_model(2, 24, 2, 12, 96, 1, 50);
  Vocab fresh(TokenScheme::kChar);
  Corpus corpus = corpus_from_lines({"abcabcabcabc"}, fresh, true);
  m = init_model(m.config, fresh, 50);

  TrainOptions opt;
  opt.steps = 2000;
  opt.lr = 1e-3;
  opt.warmup = 100;
  opt.log_every = 0;
  opt.seed = 5;
  opt.mode = SelectionMode::topk(2.0);
  TrainStats stats = train_compressor(m, corpus, opt);
  CHECK(stats.final_loss < 0.01);

  // memorization: greedy reconstruction is exact
  NuggetState nuggets = encode(m, corpus.docs[0], 2.0);
  std::vector<int> recon =
      greedy_reconstruct(m, nuggets, corpus.docs[0].size(), corpus.docs[0].size());
  CHECK(recon == corpus.docs[0]);
}

TEST_CASE("training is deterministic for a fixed seed" * doctest::timeout(300)) {
  Vocab fresh_a(TokenScheme::kChar);
  Rng ra(61);
  auto lines = synth_patterned(ra, 6, 8, 10);
  Corpus corpus_a = corpus_from_lines(lines, fresh_a, true);

  auto run_once = [&]() {
    DodoModel m = tiny_model(2, 16, 2, 12, 96, 1, 60);
    m = init_model(m.config, fresh_a, 60);
    TrainOptions opt;
    opt.steps = 120;
    opt.lr = 1e-3;
    opt.warmup = 20;
    opt.log_every = 0;
    opt.seed = 8;
    opt.mode = SelectionMode::topk(2.0);
    return train_compressor(m, corpus_a, opt).final_loss;
  };
  const double l1 = run_once();
  const double l2 = run_once();
  CHECK(l1 == l2);
}

TEST_CASE("nan loss aborts with a distinct error") {
  DodoModel m = tiny_model();
  // poison a parameter so the first step diverges
  for (auto& v : m.decoder.lm_head.data()) v = std::numeric_limits<double>::quiet_NaN();
  Vocab fresh(TokenScheme::kChar);
  Corpus corpus = corpus_from_lines({"abcabc"}, fresh, true);
  DodoModel fresh_model = init_model(m.config, fresh, 3);
  for (auto& v : fresh_model.decoder.lm_head.data()) v = std::numeric_limits<double>::quiet_NaN();
  TrainOptions opt;
  opt.steps = 3;
  opt.log_every = 0;
  try {
    train_compressor(fresh_model, corpus, opt);
    FAIL("expected a NaN-loss error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kNanLoss);
  }
}
