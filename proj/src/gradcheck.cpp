#include "mlmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

namespace mlmc {

namespace {

using Rng = std::mt19937_64;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape), 0.0, true);
  for (auto& v : t.value()) v = dist(rng);
  return t;
}

// Scalarize an op output with fixed random coefficients so every output
// element contributes to the checked gradient.
Tensor weighted_loss(const Tensor& out, const std::vector<double>& coeffs) {
  Tensor c(out.shape(), coeffs);
  return sum(multiply(out, c));
}

struct Case {
  std::vector<Tensor> inputs;
  std::function<Tensor()> forward;  // rebuilds the graph from current values
};

Case make_case(const std::string& op, Rng& rng) {
  std::uniform_int_distribution<int> dim(2, 6);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  auto coeffs_for = [&](const Tensor& out) {
    std::vector<double> c(out.size());
    for (auto& v : c) v = coeff(rng);
    return c;
  };

  Case cs;
  if (op == "add" || op == "subtract" || op == "multiply") {
    std::vector<int> sh{dim(rng), dim(rng)};
    cs.inputs = {random_tensor(sh, rng), random_tensor(sh, rng)};
    auto fn = op == "add" ? add : (op == "subtract" ? subtract : multiply);
    auto c = coeffs_for(fn(cs.inputs[0], cs.inputs[1]));
    cs.forward = [ins = cs.inputs, fn, c] {
      return weighted_loss(fn(ins[0], ins[1]), c);
    };
  } else if (op == "scalar_multiply") {
    cs.inputs = {random_tensor({dim(rng)}, rng)};
    double k = coeff(rng) * 3.0;
    auto c = coeffs_for(cs.inputs[0]);
    cs.forward = [ins = cs.inputs, k, c] {
      return weighted_loss(scalar_multiply(ins[0], k), c);
    };
  } else if (op == "matmul") {
    int m = dim(rng), k = dim(rng), p = dim(rng);
    cs.inputs = {random_tensor({m, k}, rng), random_tensor({k, p}, rng)};
    auto c = coeffs_for(matmul(cs.inputs[0], cs.inputs[1]));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(matmul(ins[0], ins[1]), c);
    };
  } else if (op == "matvec") {
    int m = dim(rng), k = dim(rng);
    cs.inputs = {random_tensor({m, k}, rng), random_tensor({k}, rng)};
    auto c = coeffs_for(matmul(cs.inputs[0], cs.inputs[1]));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(matmul(ins[0], ins[1]), c);
    };
  } else if (op == "leaky_relu" || op == "sigmoid" || op == "softmax" ||
             op == "sum" || op == "mean" || op == "sqnorm" || op == "pow") {
    std::vector<int> sh{dim(rng), dim(rng)};
    // keep leaky_relu inputs away from the kink, pow bases positive
    Tensor in = op == "pow" ? random_tensor(sh, rng, 0.4, 1.6)
                            : random_tensor(sh, rng);
    if (op == "leaky_relu") {
      for (auto& v : in.value())
        if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    }
    cs.inputs = {in};
    std::function<Tensor(const Tensor&)> fn;
    if (op == "leaky_relu") fn = [](const Tensor& t) { return leaky_relu(t); };
    else if (op == "sigmoid") fn = [](const Tensor& t) { return sigmoid(t); };
    else if (op == "softmax") fn = [](const Tensor& t) { return softmax_flat(t); };
    else if (op == "sum") fn = [](const Tensor& t) { return sum(t); };
    else if (op == "mean") fn = [](const Tensor& t) { return mean(t); };
    else if (op == "sqnorm") fn = [](const Tensor& t) { return sqnorm(t); };
    else fn = [](const Tensor& t) { return pow_elem(t, 0.67); };
    auto c = coeffs_for(fn(in));
    cs.forward = [ins = cs.inputs, fn, c] {
      return weighted_loss(fn(ins[0]), c);
    };
  } else if (op == "conv2d" || op == "conv2d_reflect" ||
             op == "conv2d_stride2") {
    int C = 2, H = 6, W = 6, OC = 2;
    Padding pad = op == "conv2d_reflect" ? Padding::Reflect : Padding::Zero;
    int stride = op == "conv2d_stride2" ? 2 : 1;
    cs.inputs = {random_tensor({C, H, W}, rng),
                 random_tensor({OC, C, 3, 3}, rng)};
    auto c = coeffs_for(conv2d(cs.inputs[0], cs.inputs[1], stride, pad));
    cs.forward = [ins = cs.inputs, stride, pad, c] {
      return weighted_loss(conv2d(ins[0], ins[1], stride, pad), c);
    };
  } else if (op == "conv2d_depthwise") {
    cs.inputs = {random_tensor({2, 6, 6}, rng), random_tensor({3, 3}, rng)};
    auto c = coeffs_for(conv2d(cs.inputs[0], cs.inputs[1], 1, Padding::Reflect));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(conv2d(ins[0], ins[1], 1, Padding::Reflect), c);
    };
  } else if (op == "downsample") {
    cs.inputs = {random_tensor({2, 6, 6}, rng)};
    auto c = coeffs_for(downsample(cs.inputs[0], 2));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(downsample(ins[0], 2), c);
    };
  } else if (op == "upsample_nearest") {
    cs.inputs = {random_tensor({2, 3, 3}, rng)};
    auto c = coeffs_for(upsample_nearest(cs.inputs[0], 2));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(upsample_nearest(ins[0], 2), c);
    };
  } else if (op == "add_channel_bias") {
    cs.inputs = {random_tensor({3, 4, 4}, rng), random_tensor({3}, rng)};
    auto c = coeffs_for(add_channel_bias(cs.inputs[0], cs.inputs[1]));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(add_channel_bias(ins[0], ins[1]), c);
    };
  } else if (op == "concat_channels") {
    int H = dim(rng), W = dim(rng);
    cs.inputs = {random_tensor({2, H, W}, rng), random_tensor({3, H, W}, rng)};
    auto c = coeffs_for(concat_channels(cs.inputs[0], cs.inputs[1]));
    cs.forward = [ins = cs.inputs, c] {
      return weighted_loss(concat_channels(ins[0], ins[1]), c);
    };
  } else {
    throw std::invalid_argument("grad_check: unknown op '" + op + "'");
  }
  return cs;
}

}  // namespace

const std::vector<std::string>& registered_ops() {
  static const std::vector<std::string> ops = {
      "add",        "subtract",        "multiply",       "scalar_multiply",
      "matmul",     "matvec",          "conv2d",         "conv2d_reflect",
      "conv2d_stride2", "conv2d_depthwise", "downsample", "upsample_nearest",
      "concat_channels", "add_channel_bias", "leaky_relu", "sigmoid", "softmax",
      "sum",        "mean",            "pow",            "sqnorm"};
  return ops;
}

double grad_check(const std::string& op_name, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("grad_check: trials must be >= 1");
  const double h = 1e-5;
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Case cs = make_case(op_name, rng);
    Tensor loss = cs.forward();
    backward(loss);
    for (auto& in : cs.inputs) {
      std::vector<double> analytic = in.grad();
      for (int i = 0; i < in.size(); ++i) {
        const double orig = in.value()[i];
        in.value()[i] = orig + h;
        const double fp = cs.forward().item();
        in.value()[i] = orig - h;
        const double fm = cs.forward().item();
        in.value()[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom =
            std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
      }
    }
  }
  return worst;
}

std::vector<GradCheckResult> grad_check_all(int trials, std::uint64_t seed) {
  std::vector<GradCheckResult> out;
  for (const auto& op : registered_ops())
    out.push_back({op, grad_check(op, trials, seed + out.size())});
  return out;
}

}  // namespace mlmc
