#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "selection.hpp"
#include "test_util.hpp"

using namespace dodo;
using namespace dodo::testing;

namespace {

// Independent sort oracle: forced last index, top k-1 of the rest by score,
// smaller index on ties.
std::vector<std::size_t> brute_force_topk(const std::vector<double>& s, double r) {
  const std::size_t n = s.size();
  const std::size_t k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / r - 1e-9));
  std::vector<std::pair<double, std::size_t>> rest;
  for (std::size_t i = 0; i + 1 < n; ++i) rest.emplace_back(s[i], i);
  std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < std::max<std::size_t>(k, 1); ++i) out.push_back(rest[i].second);
  out.push_back(n - 1);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("select_topk pinned examples") {
  CHECK(select_topk(std::vector<double>{0.5}, 7.0).indices == std::vector<std::size_t>{0});

  std::vector<double> desc = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
  Selection s = select_topk(desc, 10.0);
  CHECK(s.k() == 1);
  CHECK(s.indices == std::vector<std::size_t>{9});  // last token forced despite top score at 0

  std::vector<double> mixed = {.1, .9, .2, .8, .3, .0};
  Selection m = select_topk(mixed, 2.0);
  CHECK(m.indices == std::vector<std::size_t>{1, 3, 5});
  CHECK(m.scores == std::vector<double>{.9, .8, .0});

  CHECK_THROWS_AS(select_topk(std::vector<double>{}, 2.0), Error);
}

TEST_CASE("select_topk equals the brute-force oracle exhaustively, n <= 256") {
  Rng rng(77);
  const double ratios[] = {1, 2, 5, 10, 20};
  for (std::size_t n = 1; n <= 256; ++n) {
    std::vector<double> s(n);
    for (auto& v : s) v = std::floor(rng.uniform() * 8.0);  // coarse values force ties
    for (double r : ratios) {
      Selection got = select_topk(s, r);
      const std::size_t expect_k =
          static_cast<std::size_t>(std::ceil(static_cast<double>(n) / r - 1e-9));
      REQUIRE(got.k() == std::max<std::size_t>(expect_k, 1));
      REQUIRE(got.indices == brute_force_topk(s, r));
    }
  }
}

TEST_CASE("select_threshold limits, monotonicity, prefix stability") {
  std::vector<double> s = {0.3, -0.2, 0.9, 0.9, -1.5, 0.0};
  Selection all = select_threshold(s, -2.0);
  CHECK(all.k() == s.size());
  Selection none = select_threshold(s, 0.9);  // strict: equal scores are not selected
  CHECK(none.indices == std::vector<std::size_t>{});

  // monotone: lambda1 <= lambda2 implies selection(lambda2) subset of selection(lambda1)
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(40);
    for (auto& x : v) x = rng.normal();
    const double l1 = rng.normal(), l2 = l1 + std::fabs(rng.normal());
    auto s1 = select_threshold(v, l1).indices;
    auto s2 = select_threshold(v, l2).indices;
    CHECK(std::includes(s1.begin(), s1.end(), s2.begin(), s2.end()));
  }

  // prefix restriction equals prefix selection
  std::vector<double> full(64);
  for (auto& x : full) x = rng.normal();
  for (std::size_t t = 1; t <= full.size(); ++t) {
    auto prefix = select_threshold(std::span<const double>(full).subspan(0, t), 0.1).indices;
    auto whole = select_threshold(full, 0.1).indices;
    std::vector<std::size_t> restricted;
    for (std::size_t i : whole)
      if (i < t) restricted.push_back(i);
    CHECK(prefix == restricted);
  }
}

TEST_CASE("calibrate_threshold quantile behavior") {
  Rng rng(13);
  std::vector<double> uniform(5000);
  for (auto& v : uniform) v = rng.uniform();
  const double lam = calibrate_threshold(uniform, 10.0);
  CHECK(lam == doctest::Approx(0.9).epsilon(0.02));
  std::size_t above = 0;
  for (double v : uniform)
    if (v > lam) ++above;
  CHECK(std::fabs(static_cast<double>(above) / 5000.0 - 0.1) < 0.02);

  // r = 1 selects everything
  const double lam1 = calibrate_threshold(uniform, 1.0);
  CHECK(select_threshold(uniform, lam1).k() == uniform.size());

  std::vector<double> tiny(99, 0.5);
  CHECK_THROWS_AS(calibrate_threshold(tiny, 2.0), Error);

  // held-out sample from the same distribution: fraction within +-20% of 1/r
  for (double r : {2.0, 5.0, 10.0}) {
    std::vector<double> train(4000), held(4000);
    for (auto& v : train) v = rng.normal();
    for (auto& v : held) v = rng.normal();
    const double cal = calibrate_threshold(train, r);
    std::size_t sel = 0;
    for (double v : held)
      if (v > cal) ++sel;
    const double frac = static_cast<double>(sel) / static_cast<double>(held.size());
    CHECK(std::fabs(frac - 1.0 / r) / (1.0 / r) < 0.2);
  }
}

TEST_CASE("dodo_compress: r=1 keeps every state bit-identically") {
  DodoModel m = tiny_model();
  Rng rng(3);
  std::vector<int> tokens = random_tokens(rng, m, 9);
  NuggetState nug = dodo_compress(m.compressor, m.scorer, m.features, m.config, tokens, 0,
                                  SelectionMode::topk(1.0));
  CHECK(nug.k() == tokens.size());
  ForwardOptions opt;
  opt.want_logits = false;
  ForwardResult enc = transformer_forward(m.compressor, m.config, tokens, 0, {}, opt);
  for (std::size_t l = 0; l < m.config.layers; ++l)
    CHECK(max_abs_diff(nug.memory.layers[l].data(), enc.states.block_input(l).data()) == 0.0);
}

TEST_CASE("dodo_compress: 20x ratio on 20 tokens keeps only the final token") {
  DodoModel m = tiny_model();
  Rng rng(4);
  std::vector<int> tokens = random_tokens(rng, m, 20);
  NuggetState nug = dodo_compress(m.compressor, m.scorer, m.features, m.config, tokens, 0,
                                  SelectionMode::topk(20.0));
  CHECK(nug.k() == 1);
  CHECK(nug.selection.indices == std::vector<std::size_t>{19});
  CHECK(nug.memory.positions == std::vector<std::size_t>{19});
}

TEST_CASE("dodo_compress threshold output is invariant to appended suffixes") {
  DodoModel m = tiny_model(2, 16, 2, 10, 96);
  Rng rng(5);
  std::vector<int> tokens = random_tokens(rng, m, 24);
  const std::size_t t = 15;
  std::vector<int> prefix(tokens.begin(), tokens.begin() + t);

  const std::vector<double> scores = [&] {
    Tensor f = scorer_features(m.features, m.config, prefix, 0);
    return m.scorer.forward(f).data();
  }();
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double lam = sorted[sorted.size() / 2];

  NuggetState a = dodo_compress(m.compressor, m.scorer, m.features, m.config, prefix, 0,
                                SelectionMode::threshold(lam));
  NuggetState b = dodo_compress(m.compressor, m.scorer, m.features, m.config, tokens, 0,
                                SelectionMode::threshold(lam));
  // restrict b to indices < t and compare
  std::vector<std::size_t> restricted;
  for (std::size_t i : b.selection.indices)
    if (i < t) restricted.push_back(i);
  REQUIRE(a.selection.indices == restricted);
  for (std::size_t l = 0; l < m.config.layers; ++l)
    for (std::size_t i = 0; i < a.k(); ++i)
      for (std::size_t j = 0; j < m.config.width; ++j)
        CHECK(a.memory.layers[l].at(i, j) == b.memory.layers[l].at(i, j));
}
