#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "rcsnet/ops.hpp"

using namespace rcsnet;

TEST_SUITE("tensor") {

TEST_CASE("construction and accessors") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.dim() == 2);
  CHECK(t.at({1, 2}) == 6.0f);
  CHECK(shape_str(t.shape()) == "(2,3)");
  CHECK_THROWS_AS(Tensor({2, 3}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(t.item(), ContractError);
  CHECK(Tensor::scalar(2.5f).item() == 2.5f);
  CHECK(Tensor::full({4}, 3.0f).data()[3] == 3.0f);
}

TEST_CASE("non-finite results raise NumericError") {
  const Tensor x({2}, {1.0f, std::numeric_limits<float>::max()});
  CHECK_THROWS_AS(scale(x, 10.0), NumericError);
  const Tensor z({1}, {0.0f});
  CHECK_THROWS_AS(div(Tensor({1}, {1.0f}), z), NumericError);
}

TEST_CASE("broadcasting rules") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row({1, 3}, {10, 20, 30});
  const auto s = add(a, row);
  CHECK(s.at({1, 2}) == 36.0f);
  CHECK(mul(a, Tensor::scalar(2.0f)).at({0, 1}) == 4.0f);
  CHECK_THROWS_AS(add(a, Tensor({3, 2}, std::vector<float>(6, 0))), DimensionError);
}

TEST_CASE("backward accumulates through shared subexpressions") {
  Tensor64 x({3}, {1.0, -2.0, 0.5}, true);
  // f = sum(x*x + x) -> df/dx = 2x + 1
  const auto y = sum(add(mul(x, x), x));
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(x.grad()[1] == doctest::Approx(-3.0));
  CHECK(x.grad()[2] == doctest::Approx(2.0));
  // Leaf gradients accumulate across calls.
  backward(sum(x));
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward runs in reverse execution order") {
  Tensor64 x({2}, {0.3, 0.7}, true);
  const auto a = sigmoid(x);
  const auto b = tanh(a);
  const auto c = sum(b);
  const auto fwd = collect_graph(c);
  const auto bwd = backward(c);
  REQUIRE(fwd.size() == 3);
  REQUIRE(bwd.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(bwd[i].seq == fwd[2 - i].seq);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor64 x({2}, {1.0, 2.0}, true);
  Tensor64 y;
  {
    NoGradGuard g;
    y = mul(x, x);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
  CHECK(GradMode::enabled());
}

TEST_CASE("detach cuts the graph") {
  Tensor64 x({2}, {1.0, 2.0}, true);
  const auto d = mul(x, x).detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(d.data()[1] == 4.0);
}

TEST_CASE("pointwise and structural gradients") {
  std::mt19937_64 rng(3);
  auto a = oracle::random_tensor<double>(rng, {2, 3, 4}, -1, 1, true);
  auto b = oracle::random_tensor<double>(rng, {2, 1, 4}, 0.5, 1.5, true);
  auto c = oracle::random_tensor<double>(rng, {2, 3, 4}, -1, 1, true);

  SUBCASE("unary") {
    const auto r = gradcheck::check(
        [&] {
          return sum(add(add(sigmoid(a), tanh(c)),
                         add(square(a), add(sqrt_eps(square(c)), scale(relu(add_scalar(a, 0.1)), 0.5)))));
        },
        {a, c});
    INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
    CHECK(r.failed == 0);
  }
  SUBCASE("binary with broadcast") {
    const auto r = gradcheck::check([&] { return sum(add(div(a, b), mul(sub(c, b), a))); }, {a, b, c});
    INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
    CHECK(r.failed == 0);
  }
  SUBCASE("abs away from zero") {
    auto p = oracle::random_tensor<double>(rng, {5}, 0.2, 1.0, true);
    const auto r = gradcheck::check([&] { return sum(abs(scale(p, -1.0))); }, {p});
    INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
    CHECK(r.failed == 0);
  }
  SUBCASE("structural") {
    const auto r = gradcheck::check(
        [&] {
          const auto cat = concat<double>({a, c}, 1);
          const auto sl = slice(cat, 1, 2, 3);
          const auto sel = index_select(sl, 2, {3, 0, 0});
          const auto st = stack<double>({a, c}, 0);
          const auto bb = reshape(broadcast_to(b, {2, 3, 4}), {6, 4});
          return add(mean(square(sel)), add(sum(mean_axis(square(st), 0)), sum(square(bb))));
        },
        {a, b, c});
    INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
    CHECK(r.failed == 0);
  }
  SUBCASE("interleave and deinterleave") {
    auto v = oracle::random_tensor<double>(rng, {1, 4, 2, 2}, -1, 1, true);
    auto s = oracle::random_tensor<double>(rng, {1, 4, 2, 2}, -1, 1, true);
    const auto il = interleave(v, s);
    CHECK(il.at({0, 2, 1, 1}) == v.at({0, 1, 1, 1}));
    CHECK(il.at({0, 7, 0, 1}) == s.at({0, 3, 0, 1}));
    const auto [v2, s2] = deinterleave(il);
    CHECK(oracle::max_abs_diff(v2, oracle::values(v)) == 0.0);
    CHECK(oracle::max_abs_diff(s2, oracle::values(s)) == 0.0);
    const auto r = gradcheck::check([&] { return sum(square(scale(interleave(v, square(s)), 1.5))); }, {v, s});
    INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
    CHECK(r.failed == 0);
  }
}

TEST_CASE("gru cell matches the loop reference and its gradient") {
  std::mt19937_64 rng(9);
  const std::size_t batch = 2, n = 3, m = 4;
  GruCellParams<double> p;
  auto mk = [&](Shape s) { return oracle::random_tensor<double>(rng, s, -0.5, 0.5, true); };
  p.w_z = mk({m, n}), p.u_z = mk({m, m}), p.b_z = mk({m});
  p.w_r = mk({m, n}), p.u_r = mk({m, m}), p.b_r = mk({m});
  p.w_n = mk({m, n}), p.u_n = mk({m, m}), p.b_n = mk({m});
  auto x = mk({batch, n});
  auto h = mk({batch, m});
  oracle::GruRef ref;
  ref.wz = oracle::values(p.w_z), ref.uz = oracle::values(p.u_z), ref.bz = oracle::values(p.b_z);
  ref.wr = oracle::values(p.w_r), ref.ur = oracle::values(p.u_r), ref.br = oracle::values(p.b_r);
  ref.wn = oracle::values(p.w_n), ref.un = oracle::values(p.u_n), ref.bn = oracle::values(p.b_n);
  const auto want = oracle::gru_step(oracle::values(x), oracle::values(h), batch, n, m, ref);
  CHECK(oracle::max_abs_diff(gru_cell_step(x, h, p), want) < 1e-12);
  const auto r = gradcheck::check([&] { return sum(square(gru_cell_step(x, h, p))); },
                                  {x, h, p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r, p.w_n, p.u_n, p.b_n});
  INFO("worst ", r.worst, " at ", r.worst_at, " of ", r.checked);
  CHECK(r.failed == 0);
}

}
