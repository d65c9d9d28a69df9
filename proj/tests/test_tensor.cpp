#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "rng.hpp"
#include "tensor.hpp"

using namespace dodo;
using dodo::testing::fd_check;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("matmul values") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  auto c = matmul(eye, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.data()[i] == b.data()[i]);

  auto r = Tensor::from_data({1, 2}, {1, 2});
  auto col = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(r, col).value() == 11.0);
}

TEST_CASE("matmul shape errors name both shapes") {
  auto a = Tensor::from_data({2, 3}, std::vector<double>(6, 1.0));
  auto b = Tensor::from_data({4, 2}, std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(matmul(a, b), Error);
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("(2,3)") != std::string::npos);
    CHECK(what.find("(4,2)") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(7);
  const auto a0 = random_vec(rng, 12);
  const auto b0 = random_vec(rng, 8);
  auto loss_of_a = [&](const std::vector<double>& av) {
    auto a = Tensor::from_data({3, 4}, av);
    auto b = Tensor::from_data({4, 2}, b0);
    return sum(matmul(a, b)).value();
  };
  auto a = Tensor::from_data({3, 4}, a0, true);
  auto b = Tensor::from_data({4, 2}, b0, true);
  auto loss = sum(matmul(a, b));
  loss.backward();
  CHECK(fd_check(loss_of_a, a0, a.grad()).max_rel < 1e-6);

  auto loss_of_b = [&](const std::vector<double>& bv) {
    auto aa = Tensor::from_data({3, 4}, a0);
    auto bb = Tensor::from_data({4, 2}, bv);
    return sum(matmul(aa, bb)).value();
  };
  CHECK(fd_check(loss_of_b, b0, b.grad()).max_rel < 1e-6);
}

TEST_CASE("softmax rows values") {
  auto x = Tensor::from_data({1, 3}, {0, 0, 0});
  auto y = softmax_rows(x);
  for (std::size_t j = 0; j < 3; ++j) CHECK(y.data()[j] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto x2 = Tensor::from_data({1, 2}, {std::log(2.0), 0.0});
  auto y2 = softmax_rows(x2);
  CHECK(y2.data()[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(y2.data()[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax with mask: rows sum to one, masked entries exactly zero, grad matches fd") {
  Rng rng(11);
  const std::size_t m = 5, n = 7;
  const auto x0 = random_vec(rng, m * n, 2.0);
  std::vector<std::uint8_t> mask(m * n, 0);
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      mask[i * n + j] = rng.uniform() < 0.6 ? 1 : 0;
      any |= mask[i * n + j] != 0;
    }
    if (!any) mask[i * n + i % n] = 1;
  }
  auto x = Tensor::from_data({m, n}, x0, true);
  auto y = softmax_rows(x, &mask);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[i * n + j]) CHECK(y.data()[i * n + j] == 0.0);
      s += y.data()[i * n + j];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  // weighted sum makes the pullback non-trivial
  const auto w = random_vec(rng, m * n);
  auto loss = sum(mul(y, Tensor::from_data({m, n}, w)));
  loss.backward();
  auto loss_of = [&](const std::vector<double>& xv) {
    auto xx = Tensor::from_data({m, n}, xv);
    return sum(mul(softmax_rows(xx, &mask), Tensor::from_data({m, n}, w))).value();
  };
  CHECK(fd_check(loss_of, x0, x.grad()).max_rel < 1e-6);
}

TEST_CASE("softmax degenerate mask is an error") {
  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  std::vector<std::uint8_t> mask = {1, 1, 0, 0};
  CHECK_THROWS_AS(softmax_rows(x, &mask), Error);
}

TEST_CASE("stop_grad is identity forward and zero backward") {
  Rng rng(3);
  const auto x0 = random_vec(rng, 6);
  auto x = Tensor::from_data({2, 3}, x0, true);
  auto s = stop_grad(x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(s.data()[i] == x0[i]);

  // d/dx sum(x + stop_grad(x)) = 1 per element
  auto l1 = sum(add(x, stop_grad(x)));
  l1.backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  // d/dx sum(x - stop_grad(x)) = 1 per element, forward exactly zero
  auto x2 = Tensor::from_data({2, 3}, x0, true);
  auto diff = sub(x2, stop_grad(x2));
  for (double v : diff.data()) CHECK(v == 0.0);
  auto l2 = sum(diff);
  l2.backward();
  for (double g : x2.grad()) CHECK(g == 1.0);
}

TEST_CASE("cross entropy: uniform and one-hot analytic values") {
  auto logits = Tensor::from_data({2, 4}, std::vector<double>(8, 0.25));
  std::vector<int> tg = {1, 3};
  CHECK(cross_entropy(logits, tg).value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  std::vector<double> hot(8, 0.0);
  hot[0 * 4 + 1] = 50.0;
  hot[1 * 4 + 3] = 50.0;
  auto sharp = Tensor::from_data({2, 4}, hot);
  CHECK(cross_entropy(sharp, tg).value() < 1e-10);

  std::vector<int> bad = {1, 9};
  CHECK_THROWS_AS(cross_entropy(logits, bad), Error);
}

TEST_CASE("cross entropy matches brute-force log-sum-exp within 1e-10") {
  Rng rng(23);
  const std::size_t t = 6, v = 11;
  const auto x0 = random_vec(rng, t * v, 2.0);
  std::vector<int> targets(t);
  for (auto& tv : targets) tv = static_cast<int>(rng.below(v));

  // independent reference implementation
  auto ref_nll = [&](const std::vector<double>& xv) {
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < v; ++j) denom += std::exp(xv[i * v + j]);
      total += std::log(denom) - xv[i * v + static_cast<std::size_t>(targets[i])];
    }
    return total / static_cast<double>(t);
  };

  auto x = Tensor::from_data({t, v}, x0, true);
  auto loss = cross_entropy(x, targets);
  loss.backward();
  CHECK(loss.value() == doctest::Approx(ref_nll(x0)).epsilon(1e-10));

  // reference gradient: softmax minus one-hot, averaged
  std::vector<double> ref_grad(t * v);
  for (std::size_t i = 0; i < t; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < v; ++j) denom += std::exp(x0[i * v + j]);
    for (std::size_t j = 0; j < v; ++j)
      ref_grad[i * v + j] = std::exp(x0[i * v + j]) / denom / static_cast<double>(t);
    ref_grad[i * v + static_cast<std::size_t>(targets[i])] -= 1.0 / static_cast<double>(t);
  }
  for (std::size_t i = 0; i < t * v; ++i) CHECK(x.grad()[i] == doctest::Approx(ref_grad[i]).epsilon(1e-10));
}

TEST_CASE("elementwise, bias, activations, norm, gather, concat, slice: fd gradient sweep") {
  Rng rng(41);
  const std::size_t m = 3, n = 5;
  const auto x0 = random_vec(rng, m * n);
  const auto y0 = random_vec(rng, m * n);
  const auto w0 = random_vec(rng, m * n);

  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> fn;
  };
  const auto weights = Tensor::from_data({m, n}, w0);
  std::vector<Case> cases = {
      {"add", [&](const Tensor& x) { return add(x, Tensor::from_data({m, n}, y0)); }},
      {"sub", [&](const Tensor& x) { return sub(x, Tensor::from_data({m, n}, y0)); }},
      {"mul", [&](const Tensor& x) { return mul(x, Tensor::from_data({m, n}, y0)); }},
      {"scale", [&](const Tensor& x) { return scale(x, -1.7); }},
      {"sigmoid", [&](const Tensor& x) { return sigmoid(x); }},
      {"tanh", [&](const Tensor& x) { return tanh_op(x); }},
      {"transpose", [&](const Tensor& x) { return transpose(x); }},
      {"reshape", [&](const Tensor& x) { return reshape(x, {n, m}); }},
      {"slice_rows", [&](const Tensor& x) { return slice_rows(x, 1, 2); }},
      {"slice_cols", [&](const Tensor& x) { return slice_cols(x, 1, 3); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto x = Tensor::from_data({m, n}, x0, true);
    auto out = c.fn(x);
    std::vector<double> wsub(w0.begin(), w0.begin() + out.size());
    auto loss = sum(mul(out, Tensor::from_data(out.shape(), wsub)));
    loss.backward();
    auto loss_of = [&](const std::vector<double>& xv) {
      auto xx = Tensor::from_data({m, n}, xv);
      auto oo = c.fn(xx);
      return sum(mul(oo, Tensor::from_data(oo.shape(), wsub))).value();
    };
    CHECK(fd_check(loss_of, x0, x.grad()).max_rel < 1e-5);
  }
}

TEST_CASE("add_bias_rows gradients") {
  Rng rng(5);
  const std::size_t m = 4, n = 3;
  const auto x0 = random_vec(rng, m * n);
  const auto b0 = random_vec(rng, n);
  const auto w0 = random_vec(rng, m * n);
  auto x = Tensor::from_data({m, n}, x0, true);
  auto b = Tensor::from_data({n}, b0, true);
  auto loss = sum(mul(add_bias_rows(x, b), Tensor::from_data({m, n}, w0)));
  loss.backward();
  auto loss_of_b = [&](const std::vector<double>& bv) {
    return sum(mul(add_bias_rows(Tensor::from_data({m, n}, x0), Tensor::from_data({n}, bv)),
                   Tensor::from_data({m, n}, w0)))
        .value();
  };
  CHECK(fd_check(loss_of_b, b0, b.grad()).max_rel < 1e-6);
}

TEST_CASE("layer_norm gradients vs fd") {
  Rng rng(13);
  const std::size_t m = 4, n = 6;
  const auto x0 = random_vec(rng, m * n, 1.5);
  const auto g0 = random_vec(rng, n);
  const auto b0 = random_vec(rng, n);
  const auto w0 = random_vec(rng, m * n);
  auto x = Tensor::from_data({m, n}, x0, true);
  auto g = Tensor::from_data({n}, g0, true);
  auto b = Tensor::from_data({n}, b0, true);
  auto loss = sum(mul(layer_norm(x, g, b), Tensor::from_data({m, n}, w0)));
  loss.backward();

  auto loss_of_x = [&](const std::vector<double>& xv) {
    return sum(mul(layer_norm(Tensor::from_data({m, n}, xv), Tensor::from_data({n}, g0),
                              Tensor::from_data({n}, b0)),
                   Tensor::from_data({m, n}, w0)))
        .value();
  };
  CHECK(fd_check(loss_of_x, x0, x.grad()).max_rel < 1e-5);

  auto loss_of_g = [&](const std::vector<double>& gv) {
    return sum(mul(layer_norm(Tensor::from_data({m, n}, x0), Tensor::from_data({n}, gv),
                              Tensor::from_data({n}, b0)),
                   Tensor::from_data({m, n}, w0)))
        .value();
  };
  CHECK(fd_check(loss_of_g, g0, g.grad()).max_rel < 1e-5);
}

TEST_CASE("gather rows/elems and scatter_cols") {
  Rng rng(17);
  const auto t0 = random_vec(rng, 5 * 3);
  auto table = Tensor::from_data({5, 3}, t0, true);
  std::vector<std::size_t> ids = {4, 0, 4};
  auto got = gather_rows(table, ids);
  CHECK(got.dim(0) == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(got.at(0, j) == t0[4 * 3 + j]);
    CHECK(got.at(1, j) == t0[0 * 3 + j]);
  }
  auto loss = sum(got);
  loss.backward();
  CHECK(table.grad()[4 * 3 + 0] == 2.0);  // row 4 used twice
  CHECK(table.grad()[0 * 3 + 0] == 1.0);
  CHECK(table.grad()[1 * 3 + 0] == 0.0);

  std::vector<std::size_t> bad = {7};
  CHECK_THROWS_AS(gather_rows(table, bad), Error);

  auto v = Tensor::from_data({4}, {1, 2, 3, 4}, true);
  auto s = scatter_cols(v, 3, 6, 2);
  CHECK(s.at(0, 2) == 1.0);
  CHECK(s.at(2, 5) == 4.0);
  CHECK(s.at(1, 0) == 0.0);
  auto l2 = sum(s);
  l2.backward();
  for (double g : v.grad()) CHECK(g == 3.0);  // summed over 3 rows
}

TEST_CASE("concat rows/cols/vec roundtrip and grads") {
  auto a = Tensor::from_data({1, 2}, {1, 2}, true);
  auto b = Tensor::from_data({2, 2}, {3, 4, 5, 6}, true);
  std::vector<Tensor> parts = {a, b};
  auto cat = concat_rows(parts);
  CHECK(cat.dim(0) == 3);
  CHECK(cat.at(2, 1) == 6.0);
  auto loss = sum(slice_rows(cat, 1, 2));
  loss.backward();
  CHECK(a.grad()[0] == 0.0);
  CHECK(b.grad()[0] == 1.0);

  auto c1 = Tensor::from_data({2, 1}, {1, 2});
  auto c2 = Tensor::from_data({2, 2}, {3, 4, 5, 6});
  std::vector<Tensor> cparts = {c1, c2};
  auto ccat = concat_cols(cparts);
  CHECK(ccat.at(0, 0) == 1.0);
  CHECK(ccat.at(0, 2) == 4.0);
  CHECK(ccat.at(1, 1) == 5.0);

  auto v1 = Tensor::from_data({2}, {1, 2});
  auto v2 = Tensor::from_data({1}, {3});
  std::vector<Tensor> vparts = {v1, v2};
  auto vcat = concat_vec(vparts);
  CHECK(vcat.dim(0) == 3);
  CHECK(vcat.at(2) == 3.0);
}

TEST_CASE("gradient accumulates across multiple uses") {
  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  auto loss = add(sum(x), sum(mul(x, x)));
  loss.backward();
  // d/dx (sum x + sum x^2) = 1 + 2x
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(x.grad()[3] == doctest::Approx(9.0));
}

TEST_CASE("no-grad guard suppresses graph construction") {
  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  NoGradGuard ng;
  auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("deterministic rng streams") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(100);
  bool same = true;
  Rng a2(99);
  for (int i = 0; i < 10; ++i) same &= (a2.uniform() == c.uniform());
  CHECK_FALSE(same);
}
