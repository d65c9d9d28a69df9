#include <cmath>

#include "doctest.h"
#include "scorer.hpp"
#include "test_util.hpp"

using namespace dodo;
using namespace dodo::testing;

TEST_CASE("scores are a function of the feature vector only") {
  DodoModel m = tiny_model();
  // duplicate feature rows must produce duplicate scores
  Rng rng(2);
  std::vector<double> row(m.config.width);
  for (auto& v : row) v = rng.normal();
  std::vector<double> data;
  for (int i = 0; i < 3; ++i) data.insert(data.end(), row.begin(), row.end());
  Tensor feats = Tensor::from_data({3, m.config.width}, data);
  Tensor s = m.scorer.forward(feats);
  CHECK(s.dim(0) == 3);
  CHECK(s.at(0) == s.at(1));
  CHECK(s.at(1) == s.at(2));
}

TEST_CASE("score vector length equals sequence length") {
  DodoModel m = tiny_model();
  Rng rng(3);
  for (std::size_t len : {1u, 5u, 17u}) {
    std::vector<int> tokens = random_tokens(rng, m, len);
    Tensor f = scorer_features(m.features, m.config, tokens, 0);
    CHECK(m.scorer.forward(f).dim(0) == len);
  }
}

TEST_CASE("no gradient reaches the frozen feature stack") {
  DodoModel m = tiny_model();
  Rng rng(4);
  std::vector<int> tokens = random_tokens(rng, m, 6);
  Tensor f = scorer_features(m.features, m.config, tokens, 0);
  CHECK_FALSE(f.requires_grad());
  Tensor s = m.scorer.forward(f);
  REQUIRE(s.requires_grad());
  Tensor loss = sum(s);
  loss.backward();
  CHECK(m.scorer.w1.grad().size() == m.scorer.w1.size());
  // frozen stack params are not trainable and keep no grad buffer
  CHECK_FALSE(m.features.tok_embed.requires_grad());
  CHECK(m.features.tok_embed.grad().empty());
}

TEST_CASE("score_states detaches the feature source") {
  DodoModel m = tiny_model();
  Rng rng(14);
  std::vector<int> tokens = random_tokens(rng, m, 6);
  ForwardResult res = forward_full(m.decoder, m.config, tokens);
  Tensor s = score_states(m.scorer, res.states, m.config.feature_layer);
  sum(s).backward();
  // decoder produced the features but receives no gradient through the scorer
  CHECK(m.decoder.tok_embed.grad().empty());
  CHECK(m.scorer.w1.grad().size() == m.scorer.w1.size());
}

TEST_CASE("select_probability is sigmoid: midpoint, monotone, bounded") {
  Tensor s = Tensor::from_data({5}, {0.0, -2.0, -1.0, 1.0, 50.0});
  Tensor p = select_probability(s);
  CHECK(p.at(0) == 0.5);
  CHECK(p.at(1) < p.at(2));
  CHECK(p.at(2) < p.at(3));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(p.at(i) > 0.0);
    CHECK(p.at(i) <= 1.0);
  }
  CHECK(p.at(4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("independent documents score independently (permutation consistency)") {
  DodoModel m = tiny_model();
  Rng rng(6);
  std::vector<int> doc_a = random_tokens(rng, m, 8);
  std::vector<int> doc_b = random_tokens(rng, m, 8);
  auto score_doc = [&](const std::vector<int>& doc) {
    Tensor f = scorer_features(m.features, m.config, doc, 0);
    return m.scorer.forward(f).data();
  };
  auto a1 = score_doc(doc_a);
  auto b1 = score_doc(doc_b);
  auto b2 = score_doc(doc_b);
  auto a2 = score_doc(doc_a);
  CHECK(a1 == a2);
  CHECK(b1 == b2);
}
