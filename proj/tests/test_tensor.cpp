#include <doctest.h>

#include <cmath>
#include <random>

#include "mlmc/gradcheck.hpp"
#include "mlmc/optim.hpp"
#include "mlmc/tensor.hpp"

using namespace mlmc;

TEST_CASE("add matches elementwise definition") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b({2}, {3.0, 4.0});
  Tensor c = add(a, b);
  CHECK(c.value()[0] == 4.0);
  CHECK(c.value()[1] == 6.0);
}

TEST_CASE("add rejects mismatched shapes") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b({3}, {1.0, 2.0, 3.0});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2]"),
                       std::invalid_argument);
}

TEST_CASE("softmax of zeros is uniform") {
  Tensor a({4}, {0.0, 0.0, 0.0, 0.0});
  Tensor s = softmax_flat(a);
  for (double v : s.value()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax is positive and sums to 1 for any finite input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a({7}, 0.0);
    for (auto& v : a.value()) v = dist(rng);
    Tensor s = softmax_flat(a);
    double total = 0.0;
    for (double v : s.value()) {
      CHECK(v > 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("conv of constant input with sum-one kernel preserves the constant") {
  Tensor x({1, 5, 5}, 1.0);
  Tensor k({3, 3}, std::vector<double>(9, 1.0 / 9.0));
  Tensor y = conv2d(x, k, 1, Padding::Reflect);
  for (double v : y.value()) CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("conv rejects even kernel sides") {
  Tensor x({1, 5, 5}, 1.0);
  Tensor k({2, 2}, std::vector<double>(4, 0.25));
  CHECK_THROWS_AS(conv2d(x, k), std::invalid_argument);
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Tensor w({2, 3}, 0.5, true);
  backward(sum(w));
  for (double g : w.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of squared norm doubles the value") {
  Tensor w({1}, {3.0}, true);
  backward(sqnorm(w));
  CHECK(w.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar tensors") {
  Tensor w({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(w), std::invalid_argument);
}

TEST_CASE("backward of a sum of losses equals the sum of separate passes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor w({3, 3}, 0.0, true);
  for (auto& v : w.value()) v = dist(rng);

  backward(sqnorm(w));
  auto g1 = w.grad();
  backward(mean(w));
  auto g2 = w.grad();
  backward(add(sqnorm(w), mean(w)));
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK(std::abs(w.grad()[i] - (g1[i] + g2[i])) < 1e-12);
}

TEST_CASE("pow rejects negative base with fractional exponent") {
  Tensor a({2}, {-1.0, 2.0});
  CHECK_THROWS_AS(pow_elem(a, 0.5), std::invalid_argument);
  CHECK_NOTHROW(pow_elem(a, 2.0));
}

TEST_CASE("repeated backward over a shared subgraph resets stale gradients") {
  Tensor w({2}, {1.0, 2.0}, true);
  Tensor s = sqnorm(w);
  backward(s);
  auto first = w.grad();
  backward(s);
  CHECK(w.grad() == first);
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  Tensor theta({1}, {1.0}, true);
  theta.set_name("theta");
  AdamOptimizer opt;
  opt.add_param(theta);
  backward(sum(theta));  // gradient = 1
  opt.step(0.1);
  CHECK(theta.value()[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
  Tensor theta({2}, {0.3, -0.7}, true);
  AdamOptimizer opt;
  opt.add_param(theta);
  backward(sqnorm(subtract(theta, theta)));  // identically zero loss
  opt.step(0.1);
  CHECK(theta.value()[0] == 0.3);
  CHECK(theta.value()[1] == -0.7);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam rejects non-finite gradients by parameter name") {
  Tensor theta({1}, {1.0}, true);
  theta.set_name("phi_test");
  AdamOptimizer opt;
  opt.add_param(theta);
  backward(sum(theta));
  theta.node()->grad[0] = std::nan("");
  CHECK_THROWS_WITH_AS(opt.step(0.1), doctest::Contains("phi_test"),
                       std::runtime_error);
}

TEST_CASE("seeded adam trajectories are bit-identical") {
  auto run = [] {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor w({4}, 0.0, true);
    for (auto& v : w.value()) v = dist(rng);
    AdamOptimizer opt;
    opt.add_param(w);
    for (int i = 0; i < 20; ++i) {
      backward(sqnorm(w));
      opt.step(0.05);
    }
    return w.value();
  };
  CHECK(run() == run());
}

TEST_CASE("grad check: exact linear ops") {
  CHECK(grad_check("add", 5, 1) < 1e-10);
  CHECK(grad_check("sum", 5, 2) < 1e-10);
}

TEST_CASE("grad check: smooth nonlinear ops against finite differences") {
  CHECK(grad_check("sigmoid", 5, 3) < 1e-6);
  CHECK(grad_check("softmax", 5, 4) < 1e-6);
  CHECK(grad_check("conv2d", 3, 5) < 1e-6);
  CHECK(grad_check("conv2d_stride2", 3, 6) < 1e-6);
  CHECK(grad_check("conv2d_reflect", 3, 7) < 1e-6);
  CHECK(grad_check("pow", 5, 8) < 1e-6);
}

TEST_CASE("matmul matches a hand computation") {
  Tensor a({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor v({2}, {1.0, -1.0});
  Tensor r = matmul(a, v);
  CHECK(r.value()[0] == -1.0);
  CHECK(r.value()[1] == -1.0);
}
