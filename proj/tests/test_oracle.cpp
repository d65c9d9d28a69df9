#include <algorithm>
#include <cmath>
#include <vector>

#include "compressor.hpp"
#include "doctest.h"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace dodo;
using namespace dodo::testing;

namespace {

// Exhaustive C(n, k) minimum for the same evaluation function.
double exhaustive_min(const SelectionEvalFn& eval, std::size_t n, std::size_t k) {
  std::vector<std::size_t> combo(k);
  for (std::size_t i = 0; i < k; ++i) combo[i] = i;
  double best = eval(combo);
  while (true) {
    std::size_t i = k;
    while (i > 0 && combo[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    best = std::min(best, eval(combo));
  }
  return best;
}

}  // namespace

TEST_CASE("k = n leaves nothing to swap") {
  auto eval = [](const std::vector<std::size_t>& sel) {
    return static_cast<double>(sel.size());
  };
  std::vector<std::size_t> all = {0, 1, 2, 3};
  OracleReport rep = greedy_optimal_selection(eval, 4, all);
  CHECK(rep.swaps_accepted == 0);
  CHECK(rep.replaced_fraction == 0.0);
  CHECK(rep.overlap == 1.0);
  CHECK(rep.best_ppl == rep.initial_ppl);
}

TEST_CASE("greedy never worsens and is bounded below by the exhaustive optimum") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(4);  // 5..8
    const std::size_t k = 1 + rng.below(3);  // 1..3
    // synthetic objective with interactions so greedy can be suboptimal
    std::vector<double> base(n);
    for (auto& v : base) v = rng.uniform(0.5, 3.0);
    std::vector<double> pair_bonus(n * n);
    for (auto& v : pair_bonus) v = rng.uniform(-0.4, 0.4);
    auto eval = [&](const std::vector<std::size_t>& sel) {
      double p = 0.0;
      for (std::size_t i : sel) p += base[i];
      for (std::size_t a : sel)
        for (std::size_t b : sel)
          if (a < b) p += pair_bonus[a * n + b];
      return std::exp(p * 0.3);
    };
    std::vector<std::size_t> initial(k);
    for (std::size_t i = 0; i < k; ++i) initial[i] = n - k + i;

    OracleReport rep = greedy_optimal_selection(eval, n, initial);
    CHECK(rep.best_ppl <= rep.initial_ppl);
    const double opt = exhaustive_min(eval, n, k);
    CHECK(rep.best_ppl >= opt - 1e-12);
    CHECK(rep.overlap == doctest::Approx(1.0 - rep.replaced_fraction));
    CHECK(std::is_sorted(rep.best_indices.begin(), rep.best_indices.end()));
  }
}

TEST_CASE("every accepted swap strictly improves (monotone trace)") {
  // trace the eval sequence: the running best must strictly decrease on accepts
  std::vector<double> values;
  auto eval = [&](const std::vector<std::size_t>& sel) {
    double p = 0.0;
    for (std::size_t i : sel) p += static_cast<double>((i * 7 + 3) % 11);
    values.push_back(p);
    return p;
  };
  std::vector<std::size_t> initial = {0, 1};
  OracleReport rep = greedy_optimal_selection(eval, 8, initial);
  CHECK(rep.best_ppl <= rep.initial_ppl);
  CHECK(rep.evaluations == values.size());
  // replay: the accepted swaps form a strictly decreasing chain
  double best = values[0];
  std::size_t accepts = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < best) {
      best = values[i];
      ++accepts;
    }
  }
  CHECK(accepts == rep.swaps_accepted);
  CHECK(best == rep.best_ppl);
}

TEST_CASE("model-backed oracle: greedy matches exhaustive ordering on a tiny case") {
  DodoModel m = tiny_model(2, 16, 2, 10, 64);
  Rng rng(92);
  std::vector<int> ctx = random_tokens(rng, m, 8);
  std::vector<int> cont = random_tokens(rng, m, 4);
  SelectionEvalFn eval = make_oracle_eval_fn(m, ctx, cont);

  NuggetState init = encode(m, ctx, 4.0);  // k = 2
  REQUIRE(init.k() == 2);
  OracleReport rep = greedy_optimal_selection(eval, ctx.size(), init.selection.indices);
  CHECK(rep.best_ppl <= rep.initial_ppl);
  CHECK(rep.best_ppl >= exhaustive_min(eval, ctx.size(), 2) - 1e-12);
  CHECK(std::isfinite(rep.best_ppl));
}
